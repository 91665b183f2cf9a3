//! Synthetic arenas written to disk for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use caption_arena::store::{
    write_embeddings, CaptionerMeta, DatasetManifest, EmbeddingMatrix, Molecule, Representation,
    TaskKind,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Two carbocycles joined by a linker, optionally with one ring nitrogen.
/// Distinct `(a, k, b, n)` give distinct scaffolds for `a <= b`.
pub fn scaffold_catalog() -> Vec<String> {
    let mut out = Vec::new();
    for a in 3..=8usize {
        for b in a..=8usize {
            for k in 0..10usize {
                for n in 0..3usize {
                    if n >= b {
                        continue;
                    }
                    let ring_a = format!("C1{}C1", "C".repeat(a - 2));
                    let mut atoms = vec!["C"; b];
                    if n > 0 {
                        atoms[n] = "N";
                    }
                    let ring_b =
                        format!("{}2{}{}2", atoms[0], atoms[1..b - 1].concat(), atoms[b - 1]);
                    out.push(format!("{ring_a}{}{ring_b}", "C".repeat(k)));
                }
            }
        }
    }
    out
}

/// `n` molecules, each a random catalog scaffold plus acyclic decorations.
pub fn corpus_smiles(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let catalog = scaffold_catalog();
    (0..n)
        .map(|_| {
            let core = &catalog[rng.gen_range(0..catalog.len())];
            let head = ["", "C", "CC", "OC", "NCC"][rng.gen_range(0..5)];
            let tail = ["", "C", "O", "CC(C)C"][rng.gen_range(0..4)];
            format!("{head}{core}{tail}")
        })
        .collect()
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

pub fn meta(name: &str, family: &str, representation: Representation) -> CaptionerMeta {
    CaptionerMeta {
        name: name.into(),
        model_family: family.into(),
        prompt_variant: "default".into(),
        representation,
        size_label: None,
    }
}

pub struct SyntheticDataset {
    pub manifest: DatasetManifest,
    pub molecule_embeddings: EmbeddingMatrix,
    pub caption_embeddings: BTreeMap<String, EmbeddingMatrix>,
}

/// Synthetic set with `mol_dim` Gaussian molecule features, the first of
/// which carries `signal` times the (centered) label. Classification labels
/// are fair coin flips, regression labels standard normal. Captioners:
/// `oracle` (1-dim, the label), `blank` (1-dim zeros) and `noise_0..`
/// (1-dim uniform on [0, 1), independent of everything else).
#[allow(clippy::too_many_arguments)]
pub fn synthetic_arena(
    name: &str,
    task: TaskKind,
    n: usize,
    mol_dim: usize,
    signal: f64,
    noise_captioners: usize,
    with_oracle: bool,
    with_blank: bool,
    rng: &mut ChaCha8Rng,
) -> SyntheticDataset {
    let smiles = corpus_smiles(n, rng);
    let labels: Vec<f64> = (0..n)
        .map(|_| match task {
            TaskKind::BinaryClassification => f64::from(u8::from(rng.gen_bool(0.5))),
            TaskKind::Regression => normal(rng),
        })
        .collect();
    let mut mol = Vec::with_capacity(n * mol_dim);
    for &y in &labels {
        let centered = match task {
            TaskKind::BinaryClassification => 2.0 * y - 1.0,
            TaskKind::Regression => y,
        };
        for d in 0..mol_dim {
            let shift = if d == 0 { signal * centered } else { 0.0 };
            mol.push((normal(rng) + shift) as f32);
        }
    }
    let mut captioners = Vec::new();
    let mut caps = BTreeMap::new();
    if with_oracle {
        captioners.push(meta("oracle", "control", Representation::Smiles));
        let values = labels.iter().map(|&y| y as f32).collect();
        caps.insert(
            "oracle".to_string(),
            EmbeddingMatrix::new(n, 1, values).unwrap(),
        );
    }
    if with_blank {
        captioners.push(meta("blank", "control", Representation::None));
        caps.insert("blank".to_string(), EmbeddingMatrix::zeros(n, 1));
    }
    for k in 0..noise_captioners {
        let name = format!("noise_{k}");
        captioners.push(meta(&name, "noise", Representation::Smiles));
        let values = (0..n).map(|_| rng.gen::<f32>()).collect();
        caps.insert(name, EmbeddingMatrix::new(n, 1, values).unwrap());
    }
    let molecules = smiles
        .into_iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (smiles, &label))| Molecule {
            id: format!("m{i:04}"),
            smiles,
            label,
        })
        .collect();
    SyntheticDataset {
        manifest: DatasetManifest {
            dataset: name.into(),
            task,
            molecules,
            captioners,
        },
        molecule_embeddings: EmbeddingMatrix::new(n, mol_dim, mol).unwrap(),
        caption_embeddings: caps,
    }
}

impl SyntheticDataset {
    /// The same molecules and embeddings with only the named captioners.
    pub fn restricted(&self, names: &[&str]) -> SyntheticDataset {
        let mut manifest = self.manifest.clone();
        manifest
            .captioners
            .retain(|c| names.contains(&c.name.as_str()));
        SyntheticDataset {
            manifest,
            molecule_embeddings: self.molecule_embeddings.clone(),
            caption_embeddings: self
                .caption_embeddings
                .iter()
                .filter(|(k, _)| names.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// Write manifests, EMB1 files and a run config into `dir`; returns the config path.
pub fn write_run(dir: &Path, datasets: &[SyntheticDataset], extra: serde_json::Value) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let mut entries = Vec::new();
    for d in datasets {
        let name = &d.manifest.dataset;
        fs::write(
            dir.join(format!("{name}.json")),
            serde_json::to_string_pretty(&d.manifest).unwrap(),
        )
        .unwrap();
        write_embeddings(&d.molecule_embeddings, dir.join(format!("{name}.mol.emb"))).unwrap();
        let mut caps = serde_json::Map::new();
        for (c, m) in &d.caption_embeddings {
            let file = format!("{name}.{c}.emb");
            write_embeddings(m, dir.join(&file)).unwrap();
            caps.insert(c.clone(), file.into());
        }
        entries.push(serde_json::json!({
            "manifest": format!("{name}.json"),
            "molecule_embeddings": format!("{name}.mol.emb"),
            "caption_embeddings": caps,
        }));
    }
    let mut config = serde_json::json!({ "datasets": entries, "out_dir": "out" });
    if let serde_json::Value::Object(extra) = extra {
        for (k, v) in extra {
            config[k] = v;
        }
    }
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caption-arena"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Run and require exit 0.
pub fn cli_ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// All files under `dir`, relative path to contents.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}
