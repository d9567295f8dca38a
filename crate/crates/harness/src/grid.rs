//! Experiment grids: datasets × engine variants × actors × seeds, described
//! in a TOML file and run in parallel.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ii20_core::classifier::Pruning;
use ii20_core::dataset::synth::{generate, SynthConfig};
use ii20_core::dataset::{Collection, GroundTruth};
use ii20_core::engine::{Dataset, EngineConfig, NnMode};
use ii20_core::pq::{KnnBuildConfig, KnnMatrix, PqConfig, PqIndex};

use crate::actor::ActorConfig;
use crate::runner::{run_session, RunOutcome};

pub const DEFAULT_TICKS: [usize; 5] = [300, 600, 900, 1800, 2700];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    /// Generate a synthetic collection instead of loading one.
    pub synth: Option<SynthConfig>,
    pub manifest: Option<PathBuf>,
    /// Ground-truth CSV for a loaded collection.
    pub labels: Option<PathBuf>,
    /// Prebuilt PQ index; trained with `pq` when absent.
    pub index: Option<PathBuf>,
    pub pq: PqConfig,
    /// Prebuilt kNN matrix; built from the index when a kNN engine needs one.
    pub knn_matrix: Option<PathBuf>,
}

/// Cross-product of engine parameters. Empty lists keep the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub base: EngineConfig,
    pub nn_mode: Vec<NnMode>,
    pub w: Vec<u64>,
    pub o: Vec<f64>,
    pub pruning: Vec<Pruning>,
    pub n_tr: Vec<usize>,
}

impl Sweep {
    pub fn expand(&self) -> Vec<EngineConfig> {
        fn or_base<T: Clone>(list: &[T], base: T) -> Vec<T> {
            if list.is_empty() {
                vec![base]
            } else {
                list.to_vec()
            }
        }
        let b = &self.base;
        let mut out = Vec::new();
        for nn in or_base(&self.nn_mode, b.nn_mode) {
            for w in or_base(&self.w, b.w) {
                for o in or_base(&self.o, b.o) {
                    for pruning in or_base(&self.pruning, b.training.pruning) {
                        for n_tr in or_base(&self.n_tr, b.training.n_tr) {
                            let mut cfg = b.clone();
                            cfg.nn_mode = nn;
                            cfg.w = w;
                            cfg.o = o;
                            cfg.training.pruning = pruning;
                            cfg.training.n_tr = n_tr;
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub seeds: Vec<u64>,
    /// Image counts at which metrics are aggregated.
    pub ticks: Option<Vec<usize>>,
    pub datasets: Vec<DatasetSpec>,
    pub engines: Vec<EngineConfig>,
    pub sweep: Option<Sweep>,
    /// Oracle proportions of the classifier-only baselines to include.
    pub baselines: Vec<f64>,
    pub actors: Vec<ActorConfig>,
}

impl GridSpec {
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut spec: GridSpec = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // relative data paths are taken from the spec's directory
        let dir = path.parent().unwrap_or(Path::new("."));
        for d in &mut spec.datasets {
            for p in [&mut d.manifest, &mut d.labels, &mut d.index, &mut d.knn_matrix].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(spec)
    }

    pub fn ticks(&self) -> Vec<usize> {
        self.ticks.clone().unwrap_or_else(|| DEFAULT_TICKS.to_vec())
    }

    /// Every engine variant in the grid, keyed and ordered by identifier.
    pub fn engine_variants(&self) -> anyhow::Result<Vec<EngineConfig>> {
        let mut all: Vec<EngineConfig> = self.engines.clone();
        if let Some(s) = &self.sweep {
            all.extend(s.expand());
        }
        all.extend(self.baselines.iter().map(|&o| EngineConfig::baseline(o)));
        let mut seen: BTreeMap<String, EngineConfig> = BTreeMap::new();
        let mut out = Vec::new();
        for cfg in all {
            cfg.validate()?;
            let id = cfg.identifier();
            match seen.get(&id) {
                Some(prev) if *prev == cfg => continue,
                Some(_) => bail!("two different engine configurations share the identifier {id}"),
                None => {
                    seen.insert(id, cfg.clone());
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.seeds.is_empty(), "the grid needs at least one seed");
        anyhow::ensure!(!self.datasets.is_empty(), "the grid needs at least one dataset");
        anyhow::ensure!(!self.actors.is_empty(), "the grid needs at least one actor");
        for a in &self.actors {
            a.validate()?;
        }
        let mut names = std::collections::BTreeSet::new();
        for d in &self.datasets {
            anyhow::ensure!(!d.name.is_empty(), "every dataset needs a name");
            anyhow::ensure!(names.insert(&d.name), "duplicate dataset name {}", d.name);
            anyhow::ensure!(
                d.synth.is_some() != d.manifest.is_some(),
                "dataset {} needs exactly one of synth or manifest",
                d.name
            );
        }
        anyhow::ensure!(!self.engine_variants()?.is_empty(), "the grid has no engine variants");
        Ok(())
    }
}

/// Load or build the data of one grid dataset.
pub fn load_dataset(spec: &DatasetSpec, need_knn: bool) -> anyhow::Result<(Dataset, GroundTruth)> {
    let (collection, truth) = match (&spec.synth, &spec.manifest) {
        (Some(cfg), None) => generate(cfg)?,
        (None, Some(manifest)) => {
            let c = Collection::load(manifest)?;
            let labels = spec
                .labels
                .as_ref()
                .with_context(|| format!("dataset {} has no labels file", spec.name))?;
            let t = GroundTruth::load_csv(labels, c.len())?;
            (c, t)
        }
        _ => bail!("dataset {} needs exactly one of synth or manifest", spec.name),
    };
    let index = match &spec.index {
        Some(p) => PqIndex::load(p)?,
        None => PqIndex::build(&collection, &spec.pq)?,
    };
    let knn = match (&spec.knn_matrix, need_knn) {
        (Some(p), _) => Some(KnnMatrix::load(p)?),
        (None, true) => Some(index.build_knn(&KnnBuildConfig::default())?),
        (None, false) => None,
    };
    Ok((Dataset::new(collection, index, knn)?, truth))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub engine: String,
    pub actor: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub seed: u64,
    pub outcome: RunOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub engine: String,
    pub actor: String,
    pub tick: usize,
    pub runs: usize,
    /// Mean over runs with a defined macro precision at this tick.
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridReport {
    pub results: Vec<CellResult>,
    pub failures: Vec<Failure>,
    pub aggregate: Vec<AggregateRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per-tick means over seeds, for each dataset, engine and actor.
pub fn aggregate(results: &[CellResult], ticks: &[usize]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, String, String), Vec<&RunOutcome>> = BTreeMap::new();
    for r in results {
        groups
            .entry((r.dataset.clone(), r.outcome.engine.clone(), r.outcome.actor.clone()))
            .or_default()
            .push(&r.outcome);
    }
    let mut out = Vec::new();
    for ((dataset, engine, actor), runs) in groups {
        for &tick in ticks {
            let rows: Vec<_> = runs.iter().filter_map(|o| o.log.at(tick)).collect();
            let p: Vec<f64> = rows.iter().filter_map(|r| r.metrics.macro_precision).collect();
            let rc: Vec<f64> = rows.iter().map(|r| r.metrics.macro_recall).collect();
            out.push(AggregateRow {
                dataset: dataset.clone(),
                engine: engine.clone(),
                actor: actor.clone(),
                tick,
                runs: rows.len(),
                macro_precision: mean(&p),
                macro_recall: mean(&rc),
            });
        }
    }
    out
}

/// Run every cell of the grid. Failed cells are recorded, not fatal.
pub fn run_grid(spec: &GridSpec) -> anyhow::Result<GridReport> {
    spec.validate()?;
    let engines = spec.engine_variants()?;
    let need_knn = engines.iter().any(|e| e.nn_mode == NnMode::Knn);
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for dspec in &spec.datasets {
        log::info!("preparing dataset {}", dspec.name);
        let (data, truth) = load_dataset(dspec, need_knn)?;
        let mut cells = Vec::new();
        for e in &engines {
            for a in &spec.actors {
                for &seed in &spec.seeds {
                    let actor = ActorConfig {
                        seed: a.seed.wrapping_add(seed),
                        ..a.clone()
                    };
                    cells.push((e.clone().with_seed(seed), actor, seed));
                }
            }
        }
        let outcomes: Vec<_> = cells
            .par_iter()
            .map(|(e, a, seed)| (e, a, *seed, run_session(data.clone(), e.clone(), &truth, a)))
            .collect();
        for (e, a, seed, res) in outcomes {
            match res {
                Ok(outcome) => results.push(CellResult {
                    dataset: dspec.name.clone(),
                    seed,
                    outcome,
                }),
                Err(err) => {
                    log::warn!("{} {} {} seed {seed} failed: {err:#}", dspec.name, e.identifier(), a.identifier());
                    failures.push(Failure {
                        dataset: dspec.name.clone(),
                        engine: e.identifier(),
                        actor: a.identifier(),
                        seed,
                        error: format!("{err:#}"),
                    });
                }
            }
        }
    }
    let aggregate = aggregate(&results, &spec.ticks());
    Ok(GridReport {
        results,
        failures,
        aggregate,
    })
}

#[derive(Serialize)]
struct PlotSeries<'a> {
    dataset: &'a str,
    engine: &'a str,
    actor: &'a str,
    ticks: Vec<usize>,
    macro_precision: Vec<Option<f64>>,
    macro_recall: Vec<Option<f64>>,
}

impl GridReport {
    /// Write per-run metrics and timing CSVs, `aggregate.csv`, `plot.json`
    /// and `failures.json` under `dir`.
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        for r in &self.results {
            let run_dir = dir.join("runs").join(&r.dataset).join(&r.outcome.engine).join(&r.outcome.actor);
            std::fs::create_dir_all(&run_dir)?;
            r.outcome.log.save(
                &run_dir.join(format!("seed{}.csv", r.seed)),
                &run_dir.join(format!("seed{}.timing.csv", r.seed)),
            )?;
        }
        let mut w = csv::Writer::from_path(dir.join("aggregate.csv"))?;
        for row in &self.aggregate {
            w.serialize(row)?;
        }
        w.flush()?;

        let mut series: BTreeMap<(&str, &str, &str), PlotSeries> = BTreeMap::new();
        for row in &self.aggregate {
            let s = series
                .entry((&row.dataset, &row.engine, &row.actor))
                .or_insert_with(|| PlotSeries {
                    dataset: &row.dataset,
                    engine: &row.engine,
                    actor: &row.actor,
                    ticks: Vec::new(),
                    macro_precision: Vec::new(),
                    macro_recall: Vec::new(),
                });
            s.ticks.push(row.tick);
            s.macro_precision.push(row.macro_precision);
            s.macro_recall.push(row.macro_recall);
        }
        let series: Vec<_> = series.into_values().collect();
        std::fs::write(dir.join("plot.json"), serde_json::to_string_pretty(&series)?)?;
        std::fs::write(dir.join("failures.json"), serde_json::to_string_pretty(&self.failures)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_expands_to_the_cross_product() {
        let spec: GridSpec = toml::from_str(
            r#"
            seeds = [0]
            baselines = [0.0, 0.2]
            [sweep]
            w = [5, 10]
            o = [0.0, 0.2]
            "#,
        )
        .unwrap();
        let ids: Vec<String> = spec.engine_variants().unwrap().iter().map(|e| e.identifier()).collect();
        assert_eq!(
            ids,
            [
                "ii20-ann_5-rf-all-100",
                "ii20-ann_5-al_0.2-all-100",
                "ii20-ann_10-rf-all-100",
                "ii20-ann_10-al_0.2-all-100",
                "baseline-rf",
                "baseline-al_0.2",
            ]
        );
    }

    #[test]
    fn conflicting_identifiers_are_rejected() {
        let mut a = EngineConfig::default();
        let b = EngineConfig {
            s_b: 9,
            ..EngineConfig::default()
        };
        a.seed = 0;
        let spec = GridSpec {
            engines: vec![a.clone(), a, b],
            ..GridSpec::default()
        };
        assert!(spec.engine_variants().is_err());
    }
}
