//! Synthetic CHAT corpus with label-conditioned linguistic shifts.
//!
//! Dementia transcripts carry more adverbs, pronouns, interjections and
//! shorter sentences (hence more terminators); control transcripts carry more
//! nouns, auxiliaries, determiners and draw content words from a larger
//! vocabulary. Each subject has its own tag profile, and sessions of one
//! subject scatter around it.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::chat::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Half control, half dementia (control gets the odd one).
    pub n_subjects: usize,
    pub sessions_per_subject: usize,
    pub seed: u64,
    /// 0 makes the classes identical; 1 is the default shift; larger is easier.
    pub effect_scale: f64,
    /// Dirichlet concentration of a subject's tag profile around its class mean.
    pub subject_concentration: f64,
    /// Dirichlet concentration of a session around its subject profile.
    pub session_concentration: f64,
    /// Add interviewer turns, which cleaning must remove.
    pub interviewer_turns: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 100,
            sessions_per_subject: 2,
            seed: 7,
            effect_scale: 1.0,
            subject_concentration: 400.0,
            session_concentration: 800.0,
            interviewer_turns: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFile {
    /// Relative path, `<label>/<subject>-<session>.cha`.
    pub rel_path: String,
    pub subject_id: String,
    pub session_id: u32,
    pub label: Label,
    pub contents: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tag {
    Noun,
    Verb,
    Pron,
    Aux,
    Det,
    Adv,
    Adp,
    Adj,
    Cconj,
    Intj,
    Propn,
    Part,
    Sconj,
}

const TAGS: [Tag; 13] = [
    Tag::Noun,
    Tag::Verb,
    Tag::Pron,
    Tag::Aux,
    Tag::Det,
    Tag::Adv,
    Tag::Adp,
    Tag::Adj,
    Tag::Cconj,
    Tag::Intj,
    Tag::Propn,
    Tag::Part,
    Tag::Sconj,
];

// Class means over the 13 word tags; terminators come from sentence length.
const CONTROL_MEAN: [f64; 13] = [
    0.210, 0.150, 0.120, 0.082, 0.140, 0.026, 0.100, 0.035, 0.040, 0.022, 0.015, 0.030, 0.017,
];
const DEMENTIA_MEAN: [f64; 13] = [
    0.172, 0.150, 0.158, 0.062, 0.118, 0.050, 0.095, 0.031, 0.040, 0.040, 0.017, 0.030, 0.017,
];

const CONTROL_SENT_LEN: f64 = 8.6;
const DEMENTIA_SENT_LEN: f64 = 6.9;
const CONTROL_SENTENCES: (u32, u32) = (13, 20);
const DEMENTIA_SENTENCES: (u32, u32) = (15, 23);
/// Share of each content lexicon available to dementia speakers.
const DEMENTIA_VOCAB_SHARE: f64 = 0.45;

fn lexicon(tag: Tag) -> (&'static str, &'static [&'static str]) {
    match tag {
        Tag::Noun => (
            "n",
            &[
                "boy", "cookie", "jar", "stool", "girl", "mother", "sink", "water", "dish",
                "window", "curtain", "plate", "cup", "floor", "cabinet", "kitchen", "lady",
                "garden", "tree", "shelf", "towel", "lid", "apron", "counter", "faucet", "grass",
                "path", "cupboard", "bush", "bowl", "spill", "chair", "door", "sister", "brother",
                "dress", "shoe", "hand", "arm", "house",
            ],
        ),
        Tag::Verb => (
            "v",
            &[
                "take", "fall", "reach", "wash", "dry", "spill", "overflow", "hand", "stand",
                "look", "tip", "grab", "hold", "run", "see", "want", "climb", "drop", "laugh",
                "watch", "open", "steal", "ask", "notice", "pour",
            ],
        ),
        Tag::Pron => (
            "pro:sub",
            &[
                "he",
                "she",
                "it",
                "they",
                "that",
                "this",
                "something",
                "there",
                "them",
                "her",
                "him",
            ],
        ),
        Tag::Aux => (
            "aux",
            &["is", "are", "was", "has", "have", "be", "been", "will"],
        ),
        Tag::Det => ("det:art", &["the", "a", "an", "that", "this", "some"]),
        Tag::Adv => (
            "adv",
            &[
                "just",
                "really",
                "very",
                "over",
                "out",
                "away",
                "now",
                "here",
                "too",
                "also",
                "up",
                "down",
                "quickly",
                "still",
                "probably",
                "almost",
                "outside",
                "apparently",
            ],
        ),
        Tag::Adp => (
            "prep",
            &[
                "on", "in", "of", "at", "from", "to", "with", "by", "off", "into",
            ],
        ),
        Tag::Adj => (
            "adj",
            &[
                "little", "big", "wet", "full", "open", "dirty", "clean", "tall", "pretty", "busy",
                "careless", "nice", "high", "empty", "young",
            ],
        ),
        Tag::Cconj => ("coord", &["and", "but", "or"]),
        Tag::Intj => ("co", &["well", "oh", "okay", "yeah"]),
        Tag::Propn => ("n:prop", &["Mary", "Johnny", "Susie", "Tommy"]),
        Tag::Part => ("neg", &["not"]),
        Tag::Sconj => ("conj", &["because", "while", "when", "if"]),
    }
}

const FILLERS: [&str; 3] = ["uh", "um", "er"];

fn is_content(tag: Tag) -> bool {
    matches!(tag, Tag::Noun | Tag::Verb | Tag::Adj | Tag::Adv)
}

struct Profile {
    label: Label,
    tag_probs: [f64; 13],
    sent_len: f64,
}

fn class_mean(label: Label, scale: f64) -> [f64; 13] {
    let mut m = [0.0; 13];
    for i in 0..13 {
        m[i] = match label {
            Label::Control => CONTROL_MEAN[i],
            Label::Dementia => CONTROL_MEAN[i] + scale * (DEMENTIA_MEAN[i] - CONTROL_MEAN[i]),
        }
        .max(0.002);
    }
    let s: f64 = m.iter().sum();
    m.map(|v| v / s)
}

fn dirichlet_around(rng: &mut ChaCha8Rng, mean: &[f64; 13], conc: f64) -> [f64; 13] {
    let alpha = mean.map(|p| (p * conc).max(1e-3));
    Dirichlet::new(alpha).expect("positive alpha").sample(rng)
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &'a [&'a str], label: Label, content: bool) -> &'a str {
    let n = if content && label == Label::Dementia {
        ((words.len() as f64 * DEMENTIA_VOCAB_SHARE).ceil() as usize).max(1)
    } else {
        words.len()
    };
    words[rng.random_range(0..n)]
}

fn sample_tag(rng: &mut ChaCha8Rng, probs: &[f64; 13]) -> Tag {
    let mut r: f64 = rng.random();
    for (t, p) in TAGS.iter().zip(probs) {
        if r < *p {
            return *t;
        }
        r -= p;
    }
    TAGS[12]
}

/// One `*PAR` tier and its `%mor` tier.
fn sentence(rng: &mut ChaCha8Rng, p: &Profile) -> (String, String) {
    let len_dist = Poisson::new((p.sent_len - 1.0).max(0.5)).expect("positive rate");
    let len = 1 + len_dist.sample(rng) as usize;
    let retrace_rate = if p.label == Label::Dementia {
        0.06
    } else {
        0.02
    };
    let mut main = Vec::new();
    let mut mor = Vec::new();
    for _ in 0..len {
        let tag = sample_tag(rng, &p.tag_probs);
        // Half of the interjections surface as fillers, which have no %mor item.
        if tag == Tag::Intj && rng.random_bool(0.5) {
            main.push(format!("&-{}", FILLERS[rng.random_range(0..FILLERS.len())]));
            continue;
        }
        let (cat, words) = lexicon(tag);
        let w = pick(rng, words, p.label, is_content(tag));
        if rng.random_bool(retrace_rate) {
            main.push(format!("{w} [/]"));
        }
        main.push(w.to_string());
        mor.push(format!("{cat}|{}", w.to_lowercase()));
    }
    if rng.random_bool(if p.label == Label::Dementia {
        0.25
    } else {
        0.1
    }) {
        let at = rng.random_range(0..=main.len());
        main.insert(at, "(.)".to_string());
    }
    let term = if rng.random_bool(0.1) { "?" } else { "." };
    main.push(term.to_string());
    mor.push(term.to_string());
    (main.join(" "), mor.join(" "))
}

fn render(
    subject: &str,
    session: u32,
    p: &Profile,
    n_sent: u32,
    interviewer: bool,
    rng: &mut ChaCha8Rng,
) -> String {
    let group = match p.label {
        Label::Control => "Control",
        Label::Dementia => "ProbableAD",
    };
    let mut out = String::new();
    out.push_str("@UTF8\n@Begin\n@Languages:\teng\n");
    out.push_str("@Participants:\tPAR Participant, INV Investigator\n");
    out.push_str(&format!(
        "@ID:\teng|Synthetic|PAR|70;||{group}||Participant||{subject}|\n"
    ));
    out.push_str("@ID:\teng|Synthetic|INV|||||Investigator|||\n");
    out.push_str(&format!("@Comment:\tsynthetic session {session}\n"));
    if interviewer {
        out.push_str("*INV:\ttell me everything you see going on in that picture .\n");
        out.push_str("%mor:\tv|tell pro:obj|me pro:indef|everything pro:per|you v|see part|go-PRESP adv|on prep|in det:dem|that n|picture .\n");
    }
    for i in 0..n_sent {
        let (main, mor) = sentence(rng, p);
        out.push_str(&format!("*PAR:\t{main}\n%mor:\t{mor}\n"));
        if interviewer && i == n_sent / 2 {
            out.push_str("*INV:\tmhm .\n");
        }
    }
    out.push_str("@End\n");
    out
}

/// Generate the corpus in memory. Output depends only on the config.
pub fn generate_corpus(cfg: &SynthConfig) -> Vec<SynthFile> {
    let mut files = Vec::with_capacity(cfg.n_subjects * cfg.sessions_per_subject);
    let n_control = cfg.n_subjects.div_ceil(2);
    for s in 0..cfg.n_subjects {
        let label = if s < n_control {
            Label::Control
        } else {
            Label::Dementia
        };
        let subject = format!("S{:03}", s + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s as u64);
        let mean = class_mean(label, cfg.effect_scale);
        let subject_probs = dirichlet_around(&mut rng, &mean, cfg.subject_concentration);
        let (base_len, n_range) = match label {
            Label::Control => (CONTROL_SENT_LEN, CONTROL_SENTENCES),
            Label::Dementia => (
                CONTROL_SENT_LEN + cfg.effect_scale * (DEMENTIA_SENT_LEN - CONTROL_SENT_LEN),
                DEMENTIA_SENTENCES,
            ),
        };
        let subject_len = base_len + Normal::new(0.0, 0.6).expect("sd > 0").sample(&mut rng);
        for sess in 0..cfg.sessions_per_subject as u32 {
            let profile = Profile {
                label,
                tag_probs: dirichlet_around(&mut rng, &subject_probs, cfg.session_concentration),
                sent_len: (subject_len + Normal::new(0.0, 0.3).expect("sd > 0").sample(&mut rng))
                    .max(2.5),
            };
            let n_sent = rng.random_range(n_range.0..=n_range.1);
            let contents = render(
                &subject,
                sess,
                &profile,
                n_sent,
                cfg.interviewer_turns,
                &mut rng,
            );
            files.push(SynthFile {
                rel_path: format!("{}/{subject}-{sess}.cha", label.as_str()),
                subject_id: subject.clone(),
                session_id: sess,
                label,
                contents,
            });
        }
    }
    files
}

/// Write the corpus under `dir`, returning the written paths in order.
pub fn write_corpus(cfg: &SynthConfig, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for f in generate_corpus(cfg) {
        let p = dir.join(&f.rel_path);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, f.contents)?;
        paths.push(p);
    }
    Ok(paths)
}
