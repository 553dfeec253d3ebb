//! Seeded synthetic corpus with planted topic and material structure.
//!
//! The `planted-tmd` preset has five super-themes of four themes each, and
//! every theme has three sub-themes. A document draws its words from its
//! super-theme, theme and sub-theme lists plus shared filler. Each
//! super-theme owns a set of materials; documents are tagged with a few of
//! them, and a small fraction of tags is replaced by a uniformly random
//! material. The last super-theme is the superconductivity cluster, whose
//! first two themes mention superconductivity by name. Its four materials
//! are also common in two background super-themes each, as the
//! well-studied compounds of the family are.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::document::Document;
use crate::error::{Error, Result};

pub const PLANTED_TMD: &str = "planted-tmd";

/// Materials of the planted superconductor cluster.
pub const SUPERCONDUCTORS: [&str; 4] = ["MoS2", "NbSe2", "S2Ta", "Se2Ta"];

/// Materials that never belong to the superconductor cluster.
pub const DECOYS: [&str; 7] = ["CrS2", "CrSe2", "CrTe2", "FeS2", "MnS2", "MnSe2", "MnTe2"];

/// Stem that selects the superconductor topics by token search.
pub const TARGET_QUERY: &str = "superconduct";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub docs_per_theme: usize,
    pub abstract_len: usize,
    /// Materials tagged per document, drawn from its super-theme.
    pub tags_per_doc: usize,
    /// Probability that one of a document's material tags is replaced at random.
    pub label_noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PLANTED_TMD => Ok(SynthConfig {
                docs_per_theme: 20,
                abstract_len: 40,
                tags_per_doc: 2,
                label_noise: 0.05,
                seed: 2024,
            }),
            other => Err(Error::argument(format!("unknown synthetic preset `{other}`"))),
        }
    }
}

struct SuperTheme {
    words: [&'static str; 6],
    materials: &'static [&'static str],
    themes: [Theme; 4],
}

struct Theme {
    words: [&'static str; 6],
    /// Extra materials used by this theme only, with their tag probability.
    extra: &'static [(&'static str, f64)],
}

const fn theme(words: [&'static str; 6]) -> Theme {
    Theme { words, extra: &[] }
}

const SUPER_THEMES: [SuperTheme; 5] = [
    SuperTheme {
        words: ["optical", "photoluminescence", "emission", "absorption", "photonic", "light"],
        materials: &["MoS2", "MoSe2", "S2Ta", "WS2", "WSe2"],
        themes: [
            theme(["exciton", "binding", "trion", "valley", "polarization", "darkstate"]),
            theme(["photodetector", "responsivity", "photocurrent", "detector", "bandwidth", "gain"]),
            theme(["diode", "electroluminescence", "quantum", "efficiency", "injection", "lighting"]),
            theme(["harmonic", "nonlinear", "susceptibility", "pulse", "ultrafast", "femtosecond"]),
        ],
    },
    SuperTheme {
        words: ["electrochemical", "battery", "electrode", "capacity", "storage", "energy"],
        materials: &["FeS2", "MnS2", "MoS2", "MoSe2", "NbSe2", "S2Ti"],
        themes: [
            theme(["lithium", "ion", "anode", "intercalation", "cycling", "rate"]),
            theme(["sodium", "cathode", "diffusion", "voltage", "coulombic", "retention"]),
            theme(["hydrogen", "evolution", "catalyst", "overpotential", "tafel", "electrocatalysis"]),
            theme(["supercapacitor", "capacitance", "pseudocapacitive", "porous", "surface", "power"]),
        ],
    },
    SuperTheme {
        words: ["magnetic", "spin", "ferromagnetic", "magnetization", "exchange", "anisotropy"],
        materials: &["CrS2", "CrSe2", "CrTe2", "MnSe2", "MnTe2", "Se2Ta"],
        themes: [
            theme(["curie", "domain", "hysteresis", "coercivity", "remanence", "ferromagnet"]),
            theme(["antiferromagnetic", "neel", "sublattice", "frustration", "canted", "order"]),
            theme(["spintronic", "torque", "tunnel", "magnetoresistance", "valve", "spinorbit"]),
            theme(["dopant", "vacancy", "defect", "dilute", "moment", "substitution"]),
        ],
    },
    SuperTheme {
        words: ["topological", "transport", "mobility", "carrier", "semimetal", "berry"],
        materials: &["HfS2", "MoTe2", "NbSe2", "PtSe2", "Se2Ta", "S2Ta", "WTe2"],
        themes: [
            theme(["weyl", "fermion", "chiral", "anomaly", "node", "arcs"]),
            theme(["hall", "edge", "plateau", "conductance", "landau", "quantized"]),
            theme(["thermoelectric", "seebeck", "thermal", "conductivity", "figure", "merit"]),
            theme(["strain", "piezoelectric", "flexible", "deformation", "mechanical", "modulus"]),
        ],
    },
    SuperTheme {
        words: ["correlated", "lowtemperature", "electronic", "ordering", "instability", "cryogenic"],
        materials: &["MoS2", "NbSe2", "S2Ta", "Se2Ta"],
        themes: [
            Theme {
                words: ["superconductivity", "superconducting", "pairing", "cooper", "gap", "critical"],
                extra: &[("Se2Ti", 0.15)],
            },
            Theme {
                words: ["superconductor", "vortex", "meissner", "fluctuation", "transition", "isingpairing"],
                extra: &[("Se2Ti", 0.15)],
            },
            Theme {
                words: ["chargedensity", "cdw", "commensurate", "periodic", "lattice", "distortion"],
                extra: &[("Se2Ti", 0.25)],
            },
            Theme {
                words: ["electronphonon", "coupling", "kohn", "softmode", "raman", "phonon"],
                extra: &[("Se2Ti", 0.25)],
            },
        ],
    },
];

/// Sub-theme words are a theme's lead word joined to one of these.
const QUALIFIERS: [&str; 12] = [
    "dynamics", "spectroscopy", "modeling", "synthesis", "devices", "interfaces",
    "heterostructures", "monolayers", "doping", "pressure", "films", "simulations",
];

const FILLER: [&str; 12] = [
    "material", "layer", "sample", "result", "study", "property", "measurement", "structure",
    "method", "analysis", "performance", "system",
];

const GLUE: [&str; 6] = ["the", "of", "in", "and", "with", "for"];

const COUNTRIES: [&str; 8] = [
    "China", "Germany", "India", "Japan", "Korea", "Spain", "United Kingdom", "United States",
];

const AUTHORS: [&str; 24] = [
    "Abe", "Bauer", "Chen", "Dubois", "Evans", "Fischer", "Garcia", "Hansen", "Ito", "Jones",
    "Kim", "Li", "Moreau", "Nakamura", "Olsen", "Patel", "Quinn", "Rossi", "Singh", "Tanaka",
    "Usman", "Wang", "Yilmaz", "Zhang",
];

/// Generated documents plus the planted ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub docs: Vec<Document>,
    /// (super-theme, theme, sub-theme) per document.
    pub labels: Vec<(usize, usize, usize)>,
    /// Documents with a tag replaced by noise.
    pub noisy: Vec<usize>,
}

/// Every material in the generator, sorted.
pub fn materials() -> Vec<&'static str> {
    let mut all: Vec<&str> = SUPER_THEMES
        .iter()
        .flat_map(|s| {
            s.materials
                .iter()
                .copied()
                .chain(s.themes.iter().flat_map(|t| t.extra.iter().map(|e| e.0)))
        })
        .collect();
    all.sort_unstable();
    all.dedup();
    all
}

fn sub_words(theme: &Theme, sub: usize) -> [String; 4] {
    std::array::from_fn(|i| format!("{}{}", theme.words[0], QUALIFIERS[sub * 4 + i]))
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    if config.docs_per_theme == 0 || config.abstract_len == 0 || config.tags_per_doc == 0 {
        return Err(Error::argument(
            "docs_per_theme, abstract_len and tags_per_doc must be positive",
        ));
    }
    if !(0.0..=1.0).contains(&config.label_noise) {
        return Err(Error::argument("label_noise must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let all_materials = materials();

    let mut plan = Vec::new();
    for (s, st) in SUPER_THEMES.iter().enumerate() {
        for t in 0..st.themes.len() {
            for i in 0..config.docs_per_theme {
                plan.push((s, t, i % 3));
            }
        }
    }
    plan.shuffle(&mut rng);

    let mut docs = Vec::with_capacity(plan.len());
    let mut noisy = Vec::new();
    for (idx, &(s, t, sub)) in plan.iter().enumerate() {
        let st = &SUPER_THEMES[s];
        let th = &st.themes[t];
        let subs = sub_words(th, sub);
        let word = |rng: &mut ChaCha8Rng| -> String {
            let u: f64 = rng.random();
            if u < 0.35 {
                st.words.choose(rng).unwrap().to_string()
            } else if u < 0.65 {
                th.words.choose(rng).unwrap().to_string()
            } else if u < 0.9 {
                subs.choose(rng).unwrap().clone()
            } else {
                FILLER.choose(rng).unwrap().to_string()
            }
        };
        let title_words: Vec<String> = (0..4).map(|_| word(&mut rng)).collect();
        let mut body = Vec::with_capacity(config.abstract_len * 2);
        for _ in 0..config.abstract_len {
            body.push(word(&mut rng));
            if rng.random_bool(0.3) {
                body.push(GLUE.choose(&mut rng).unwrap().to_string());
            }
        }
        let title = capitalize(&title_words.join(" "));
        let abstract_text = format!("{}.", capitalize(&body.join(" ")));

        let mut tags: Vec<String> = st
            .materials
            .choose_multiple(&mut rng, config.tags_per_doc.min(st.materials.len()))
            .map(|m| m.to_string())
            .collect();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(m, p) in th.extra {
            acc += p;
            if u < acc {
                tags[0] = m.to_string();
                break;
            }
        }
        if rng.random_bool(config.label_noise) {
            let slot = rng.random_range(0..tags.len());
            tags[slot] = all_materials.choose(&mut rng).unwrap().to_string();
            noisy.push(idx);
        }
        tags.sort_unstable();
        tags.dedup();

        let n_authors = rng.random_range(1..=3);
        let authors: Vec<String> = AUTHORS
            .choose_multiple(&mut rng, n_authors)
            .map(|a| a.to_string())
            .collect();
        let country = COUNTRIES.choose(&mut rng).unwrap().to_string();
        let attributes = BTreeMap::from([
            ("author".to_string(), authors),
            ("country".to_string(), vec![country]),
            ("material".to_string(), tags),
        ]);
        docs.push(Document {
            id: format!("doc{idx:04}"),
            title,
            abstract_text,
            attributes,
        });
    }
    Ok(SynthCorpus {
        docs,
        labels: plan,
        noisy,
    })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
