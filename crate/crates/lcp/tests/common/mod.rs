//! On-disk fixture runs for the CLI tests and the acceptance harness.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

pub const WORD_DIM: usize = 8;
pub const CONTEXT_DIM: usize = 12;

const VOCAB: [&str; 20] = [
    "the", "cat", "sat", "on", "mat", "acid", "protein", "kinase", "lord", "spoke", "unto", "moses", "council", "regulation",
    "member", "state", "strong", "binding", "receptor", "shall",
];

/// Small-dimension settings that keep every block enabled.
pub const SMALL_MODEL: &str = "\
model.word_dim = 8
model.context_dim = 12
model.hidden1 = 16
model.hidden2 = 8
model.epochs = 4
model.batch_size = 8
model.lr = 0.01
model.epsilon = 0.5
bilstm.char_dim = 4
bilstm.hidden = 4
graph.window = 5
graph.min_word_count = 1
gcn.hidden = 8
gcn.output = 4
capsule.n_in = 3
capsule.d_in = 4
capsule.n_out = 2
capsule.d_out = 3
capsule.routings = 3
features.max_features = 200
";

/// A temporary directory holding three splits, vector files, lexicons and a
/// config file pointing at them.
pub struct Fixture {
    pub dir: TempDir,
    pub config: PathBuf,
}

fn vec_line(key: &str, r: &mut ChaCha8Rng, dim: usize) -> String {
    let mut s = key.to_string();
    for _ in 0..dim {
        let _ = write!(s, " {:.6}", r.gen_range(-1.0..1.0));
    }
    s.push('\n');
    s
}

/// Rows of one split: ids `<prefix>NNN`, gold driven by target length.
fn split_rows(r: &mut ChaCha8Rng, prefix: &str, n: usize, labeled: bool) -> (String, Vec<String>) {
    let corpora = ["bible", "biomed", "europarl"];
    let mut text = String::from(if labeled { "id\tcorpus\tsentence\ttoken\tcomplexity\n" } else { "id\tcorpus\tsentence\ttoken\n" });
    let mut ids = Vec::new();
    for i in 0..n {
        let len = r.gen_range(4..9);
        let words: Vec<&str> = (0..len).map(|_| *VOCAB.choose(r).unwrap()).collect();
        let target = *words.choose(r).unwrap();
        let id = format!("{prefix}{i:03}");
        let sentence = format!("\"{}.\"", words.join(" "));
        let _ = write!(text, "{id}\t{}\t{sentence}\t{target}", corpora[i % 3]);
        if labeled {
            let gold = (0.05 * target.len() as f64 + r.gen_range(-0.03..0.03)).clamp(0.0, 1.0);
            let _ = write!(text, "\t{gold:.4}");
        }
        text.push('\n');
        ids.push(id);
    }
    (text, ids)
}

/// Writes the fixture. `extra_config` is appended to the config file.
pub fn fixture(seed: u64, extra_config: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, train_ids) = split_rows(&mut r, "tr", 40, true);
    // A row whose target is not in its sentence.
    train.push_str("tr999\tbible\tnothing to see\tzebra\t0.5\n");
    let (trial, trial_ids) = split_rows(&mut r, "tl", 12, true);
    let (test, test_ids) = split_rows(&mut r, "te", 10, false);
    std::fs::write(root.join("train.tsv"), train).unwrap();
    std::fs::write(root.join("trial.tsv"), trial).unwrap();
    std::fs::write(root.join("test.tsv"), test).unwrap();

    let mut words = String::new();
    for w in VOCAB {
        words.push_str(&vec_line(w, &mut r, WORD_DIM));
    }
    std::fs::write(root.join("words.txt"), words).unwrap();
    let mut contexts = String::new();
    for id in train_ids.iter().chain(&trial_ids).chain(&test_ids) {
        contexts.push_str(&vec_line(id, &mut r, CONTEXT_DIM));
    }
    std::fs::write(root.join("contexts.txt"), contexts).unwrap();

    let lex = root.join("lexicons");
    std::fs::create_dir(&lex).unwrap();
    std::fs::write(lex.join("cefr.csv"), "lemma,level\ncat,1\nacid,3\nprotein,4\nkinase,6\nregulation,5\n").unwrap();
    std::fs::write(lex.join("subimdb.csv"), "lemma,present\nthe,1\ncat,1\nmat,1\nsat,1\n").unwrap();
    let mut senso = String::from("lemma");
    for j in 0..11 {
        let _ = write!(senso, ",d{j}");
    }
    senso.push('\n');
    for w in ["cat", "acid", "lord"] {
        senso.push_str(w);
        for _ in 0..11 {
            let _ = write!(senso, ",{:.3}", r.gen_range(0.0..5.0));
        }
        senso.push('\n');
    }
    std::fs::write(lex.join("sensorimotor.csv"), senso).unwrap();

    let config = root.join("run.cfg");
    let p = |name: &str| root.join(name).display().to_string();
    let text = format!(
        "# fixture run\nrun.seed = 7\npaths.train = {}\npaths.trial = {}\npaths.test = {}\npaths.word_vectors = {}\n\
         paths.context_vectors = {}\npaths.lexicon_dir = {}\npaths.out_dir = {}\n{SMALL_MODEL}{extra_config}",
        p("train.tsv"),
        p("trial.tsv"),
        p("test.tsv"),
        p("words.txt"),
        p("contexts.txt"),
        p("lexicons"),
        p("out"),
    );
    std::fs::write(&config, text).unwrap();
    Fixture { dir, config }
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Runs the binary with this fixture's config.
    pub fn lcp(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lcp"));
        cmd.arg("--config").arg(&self.config).args(args);
        cmd.output().unwrap()
    }
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
