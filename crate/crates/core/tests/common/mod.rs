//! Synthetic corpora shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use cogemo::cognition::SvrHyper;
use cogemo::convnet::NetworkHyper;
use cogemo::corpus::{
    parse_dataset, record_to_json, CognitiveVector, EmotionVector, LabelSpace, LabeledDataset, Record, Schema,
    ShortText,
};
use cogemo::ensemble::EnsembleConfig;
use cogemo::pipeline::PipelineConfig;
use cogemo::resources::{parse_embeddings, parse_lexicon, LexiconFormat, PosTagset, Resources};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EMOTIONS: [&str; 3] = ["joy", "anger", "fear"];
pub const FACTORS: [&str; 2] = ["NEU", "EXT"];

const LOW_STYLE: [&str; 4] = ["calm", "steady", "quiet", "gentle"];
const HIGH_STYLE: [&str; 4] = ["wild", "loud", "restless", "fierce"];
const CUES: [[&str; 2]; 3] = [["sunny", "bright"], ["furious", "hostile"], ["scared", "nervous"]];
const FILLER: [&str; 8] = ["day", "went", "home", "the", "and", "today", "just", "really"];

pub struct Synthetic {
    pub dataset: LabeledDataset,
    pub resources: Resources<f64>,
    pub dataset_jsonl: String,
    pub embeddings_txt: String,
    pub lexicon_tsv: String,
}

impl Synthetic {
    /// Writes `data.jsonl`, `embeddings.txt` and `lexicon.tsv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let d = dir.join("data.jsonl");
        let e = dir.join("embeddings.txt");
        let l = dir.join("lexicon.tsv");
        fs::write(&d, &self.dataset_jsonl).unwrap();
        fs::write(&e, &self.embeddings_txt).unwrap();
        fs::write(&l, &self.lexicon_tsv).unwrap();
        (d, e, l)
    }
}

pub fn labels() -> LabelSpace {
    LabelSpace::new(
        EMOTIONS.iter().map(|s| s.to_string()).collect(),
        FACTORS.iter().map(|s| s.to_string()).collect(),
    )
}

/// Texts from two latent groups that drive both factors together.
///
/// Each group marks itself with style words and expresses emotion `e` with
/// its own cue words: the low group uses cue set `e`, the high group cue set
/// `e + 1`. A cue word therefore means different emotions in the two groups,
/// which a classifier blind to the group cannot resolve from the cue alone.
pub fn cognitive_corpus(n: usize, dim: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let high = i % 2 == 1;
        let style = if high { &HIGH_STYLE } else { &LOW_STYLE };
        let mut tokens: Vec<&str> = style.choose_multiple(&mut rng, 2).copied().collect();
        let mut emotions = vec![false; EMOTIONS.len()];
        for (e, on) in emotions.iter_mut().enumerate() {
            if rng.gen_bool(0.4) {
                *on = true;
                let set = if high { (e + 1) % CUES.len() } else { e };
                tokens.push(CUES[set].choose(&mut rng).copied().unwrap());
            }
        }
        for _ in 0..rng.gen_range(1..=3) {
            tokens.push(FILLER.choose(&mut rng).copied().unwrap());
        }
        tokens.shuffle(&mut rng);
        let centre = if high { 4.0 } else { 2.0 };
        let cognitive = (0..FACTORS.len()).map(|_| centre + rng.gen_range(-0.4..0.4)).collect();
        let raw = tokens.join(" ");
        records.push(Record {
            text: ShortText::new(format!("s{i}"), raw).unwrap(),
            emotions: Some(EmotionVector(emotions)),
            cognitive: Some(CognitiveVector(cognitive)),
            pos: None,
        });
    }
    let labels = labels();
    let dataset = LabeledDataset::new(records, Schema::Both, labels.clone()).unwrap();
    let dataset_jsonl: String = dataset
        .records
        .iter()
        .map(|r| record_to_json(r, &labels).unwrap() + "\n")
        .collect();

    let vocab: Vec<&str> = LOW_STYLE
        .iter()
        .chain(&HIGH_STYLE)
        .chain(CUES.iter().flatten())
        .chain(&FILLER)
        .copied()
        .collect();
    let mut embeddings_txt = String::new();
    for w in &vocab {
        let v: Vec<String> = (0..dim).map(|_| format!("{:.6}", rng.gen_range(-1.0..1.0))).collect();
        embeddings_txt.push_str(&format!("{w} {}\n", v.join(" ")));
    }
    // cue words are emotional but ambiguous: each carries both of its meanings
    let mut lexicon_tsv = format!("term\t{}\n", EMOTIONS.join("\t"));
    for (set, words) in CUES.iter().enumerate() {
        let low_meaning = set;
        let high_meaning = (set + CUES.len() - 1) % CUES.len();
        for w in words {
            let row: Vec<String> = (0..EMOTIONS.len())
                .map(|e| if e == low_meaning || e == high_meaning { "0.5" } else { "0" }.to_string())
                .collect();
            lexicon_tsv.push_str(&format!("{w}\t{}\n", row.join("\t")));
        }
    }
    let resources = Resources::new(
        parse_embeddings(&embeddings_txt).unwrap(),
        vec![parse_lexicon("synthetic", &lexicon_tsv, LexiconFormat::Table).unwrap()],
        PosTagset::default(),
    );
    // round-trip through the file format so tests see what the CLI sees
    let dataset = parse_dataset(&dataset_jsonl, Schema::Both, &labels).unwrap();
    Synthetic {
        dataset,
        resources,
        dataset_jsonl,
        embeddings_txt,
        lexicon_tsv,
    }
}

/// Pipeline defaults scaled down for desk-sized runs.
pub fn scaled_config() -> PipelineConfig {
    PipelineConfig {
        ensemble: EnsembleConfig {
            network: NetworkHyper {
                n_filters: 16,
                hidden: vec![32],
                attention_hidden: 16,
                learning_rate: 3e-3,
                batch_size: 8,
                epochs: 20,
                ..NetworkHyper::default()
            },
            ..EnsembleConfig::default()
        },
        svr: SvrHyper {
            c: 10.0,
            steps: 20_000,
            ..SvrHyper::default()
        },
        ..PipelineConfig::default()
    }
}

/// The same settings as a `--config` file for the command-line tool.
pub fn scaled_config_json() -> String {
    let c = scaled_config();
    let net = &c.ensemble.network;
    serde_json::json!({
        "seed": net.seed,
        "epochs": net.epochs,
        "batch_size": net.batch_size,
        "lr": net.learning_rate,
        "filters": net.n_filters,
        "hidden": net.hidden,
        "attention_hidden": net.attention_hidden,
        "embedding_dim": 16,
        "emotions": EMOTIONS,
        "factors": FACTORS,
        "svr": c.svr,
    })
    .to_string()
}
