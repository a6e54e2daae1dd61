//! Seeded person-like records with controlled corruption, for scaling runs
//! and end-to-end tests.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{Record, Source};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub entities: usize,
    pub records_per_entity: usize,
    /// Chance that each attribute of a non-first copy gets one corruption.
    pub corruption: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthParams {
    pub fn check(&self) -> Result<()> {
        if self.entities == 0 || self.records_per_entity == 0 {
            return Err(Error::Config(
                "synth.entities and synth.records_per_entity must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.corruption) {
            return Err(Error::Config(format!(
                "synth.corruption must lie in [0, 1], got {}",
                self.corruption
            )));
        }
        Ok(())
    }
}

pub const HEADER: [&str; 4] = ["id", "name", "address", "phone"];

const SYLLABLES: [&str; 32] = [
    "ka", "lo", "mi", "ra", "te", "su", "no", "vi", "da", "ben", "cor", "el", "fa", "gin", "ho",
    "ja", "kel", "lu", "mar", "nel", "or", "pa", "qui", "ros", "sa", "tor", "ul", "ven", "wil",
    "xa", "yo", "zer",
];
const STREET_KINDS: [&str; 8] = [
    "street", "road", "avenue", "lane", "drive", "court", "place", "way",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthDataset {
    /// `[name, address, phone]` per record; the record's id is its index.
    pub rows: Vec<[String; 3]>,
    /// Every pair of ids generated from the same entity, `(smaller, larger)`
    /// in ascending order.
    pub truth: Vec<(u64, u64)>,
}

fn word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| *SYLLABLES.choose(rng).unwrap())
        .collect()
}

fn entity(rng: &mut ChaCha8Rng) -> [String; 3] {
    let name = format!("{} {}", word(rng, 2), word(rng, 3));
    let address = format!(
        "{} {} {} {}",
        rng.gen_range(1..10_000),
        word(rng, 2),
        STREET_KINDS.choose(rng).unwrap(),
        word(rng, 3)
    );
    let phone = format!(
        "({:03}) {:03}-{:04}",
        rng.gen_range(200..1000),
        rng.gen_range(0..1000),
        rng.gen_range(0..10_000)
    );
    [name, address, phone]
}

/// One typo, adjacent-word swap or word drop.
fn corrupt(value: &str, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<String> = value.split(' ').map(str::to_string).collect();
    match rng.gen_range(0..3) {
        1 if words.len() >= 2 => {
            let i = rng.gen_range(0..words.len() - 1);
            words.swap(i, i + 1);
        }
        2 if words.len() >= 2 => {
            let i = rng.gen_range(0..words.len());
            words.remove(i);
        }
        _ => {
            let i = rng.gen_range(0..words.len());
            let mut chars: Vec<char> = words[i].chars().collect();
            let slots: Vec<usize> = (0..chars.len())
                .filter(|&c| chars[c].is_ascii_alphanumeric())
                .collect();
            if let Some(&c) = slots.choose(rng) {
                chars[c] = if chars[c].is_ascii_digit() {
                    char::from(b'0' + rng.gen_range(0..10u8))
                } else {
                    char::from(b'a' + rng.gen_range(0..26u8))
                };
            }
            words[i] = chars.into_iter().collect();
        }
    }
    words.join(" ")
}

pub fn generate(params: &SynthParams) -> Result<SynthDataset> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut tagged = Vec::with_capacity(params.entities * params.records_per_entity);
    for e in 0..params.entities {
        let clean = entity(&mut rng);
        for copy in 0..params.records_per_entity {
            let mut row = clean.clone();
            if copy > 0 {
                for value in &mut row {
                    if rng.gen_bool(params.corruption) {
                        *value = corrupt(value, &mut rng);
                    }
                }
            }
            tagged.push((e, row));
        }
    }
    tagged.shuffle(&mut rng);

    let mut members: Vec<Vec<u64>> = vec![Vec::new(); params.entities];
    for (id, (e, _)) in tagged.iter().enumerate() {
        members[*e].push(id as u64);
    }
    let mut truth: Vec<(u64, u64)> = members
        .iter()
        .flat_map(|ids| {
            ids.iter()
                .enumerate()
                .flat_map(move |(x, &i)| ids[x + 1..].iter().map(move |&j| (i.min(j), i.max(j))))
        })
        .collect();
    truth.sort_unstable();
    Ok(SynthDataset {
        rows: tagged.into_iter().map(|(_, row)| row).collect(),
        truth,
    })
}

impl SynthDataset {
    /// Records under the `name, address, phone` schema with native keys set.
    pub fn to_records(&self) -> Vec<Record> {
        self.rows
            .iter()
            .enumerate()
            .map(|(id, row)| {
                let mut r =
                    Record::from_raw(id as u64, Source::Single, &[&row[0], &row[1], &row[2]]);
                r.native_key = Some(id.to_string());
                r
            })
            .collect()
    }

    /// Writes `records.csv`, `truth.csv` and a runnable `config.toml`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Csv { path, source }
        };

        let records = dir.join("records.csv");
        let mut w = csv::Writer::from_path(&records).map_err(csv_err(&records))?;
        w.write_record(HEADER).map_err(csv_err(&records))?;
        for (id, row) in self.rows.iter().enumerate() {
            w.write_record([id.to_string().as_str(), &row[0], &row[1], &row[2]])
                .map_err(csv_err(&records))?;
        }
        w.flush().map_err(|e| Error::io(&records, e))?;

        let truth = dir.join("truth.csv");
        let mut w = csv::Writer::from_path(&truth).map_err(csv_err(&truth))?;
        w.write_record(["id_a", "id_b"]).map_err(csv_err(&truth))?;
        for (a, b) in &self.truth {
            w.write_record([a.to_string(), b.to_string()])
                .map_err(csv_err(&truth))?;
        }
        w.flush().map_err(|e| Error::io(&truth, e))?;

        let config = dir.join("config.toml");
        fs::write(&config, CONFIG).map_err(|e| Error::io(&config, e))?;
        Ok(vec![records, truth, config])
    }
}

/// Pipeline settings for generated data; paths are relative to the file.
pub const CONFIG: &str = r#"[schema]
attributes = ["name", "address", "phone"]

[[sources]]
path = "records.csv"
key_column = "id"

[[templates]]
id = 1
parts = [{ kind = "consecutive_words", attr = "name", n = 2 }]

[[templates]]
id = 2
parts = [{ kind = "consecutive_words", attr = "address", n = 3 }]

[[templates]]
id = 3
parts = [
  { kind = "last_digits", attr = "phone", d = 4 },
  { kind = "consecutive_words", attr = "name", n = 1 },
]

[model]
a = 2.0
b = 0.1

[link]
rho = 0.05
tau = 0.5

[truth]
path = "truth.csv"

[grid]
a = [1.5, 2.0, 3.0]
b = [0.05, 0.1]
rho = [0.05]
tau = [0.3, 0.5, 0.7]
"#;
