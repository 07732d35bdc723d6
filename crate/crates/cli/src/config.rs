//! Experiment configuration: one TOML file plus command-line overrides.
//!
//! ```toml
//! query = """
//! S1(x,y)
//! S2(y,z)
//! S3(z,x)
//! """
//! n = 16
//! plan = "auto"
//! seeds = [1, 2, 3]
//!
//! [data]
//! distribution = "dense"
//! theta = 0.5
//!
//! [[machine]]
//! id = 1
//! kind = "linear"
//! weight = 4
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use hetjoin::bounds::{InstanceSchema, DEFAULT_TOLERANCE};
use hetjoin::cost::{Machine, MachineFleet};
use hetjoin::datagen::{
    gen_dense, gen_matching, DatabaseInstance, DenseSpec, Distribution, MatchingSpec, Relation,
};
use hetjoin::plan::PlanKind;
use hetjoin::Query;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    #[default]
    Matching,
    Dense,
    Bernoulli,
    /// Relation CSVs read from `data.dir`.
    Files,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Number of machines in a homogeneous unit-weight fleet.
    P,
    Theta,
    /// Common cardinality of every relation.
    M,
    /// Weight of machine 1; the others keep weight 1.
    Skew,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::P => "p",
            SweepParam::Theta => "theta",
            SweepParam::M => "m",
            SweepParam::Skew => "skew",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub distribution: DistKind,
    pub theta: Option<f64>,
    /// Same cardinality for every atom.
    pub m: Option<u64>,
    /// One cardinality per atom; wins over `m`.
    pub cardinalities: Option<Vec<u64>>,
    /// Directory of `<atom>.csv` files, read by `files` and written by `gen`.
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    pub dims: Option<PathBuf>,
    pub placement: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Query text, one atom per line.
    pub query: Option<String>,
    pub query_file: Option<PathBuf>,
    pub n: Option<u64>,
    /// A plan kind or `auto`.
    pub plan: Option<String>,
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub machine: Vec<Machine>,
    /// TOML file with `[[machine]]` entries, used when `machine` is empty.
    pub fleet_file: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
}

/// Flag values that replace the corresponding config entries.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Query file, one atom per line.
    #[arg(long, global = true)]
    pub query: Option<PathBuf>,
    /// Fleet file with `[[machine]]` entries.
    #[arg(long, global = true)]
    pub fleet: Option<PathBuf>,
    /// Linear fleet given by its weights, e.g. `4,2,1`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub weights: Option<Vec<u64>>,
    #[arg(long, global = true, value_enum)]
    pub dist: Option<DistKind>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long, global = true)]
    pub m: Option<u64>,
    /// Per-atom cardinalities, e.g. `16,8,4`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub cards: Option<Vec<u64>>,
    #[arg(long, global = true)]
    pub plan: Option<String>,
    /// Repeatable; replaces the config's seed list.
    #[arg(long = "seed", global = true)]
    pub seeds: Vec<u64>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[arg(long = "data-dir", global = true)]
    pub data_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing config")
    }

    /// Reads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        fix(&mut cfg.query_file);
        fix(&mut cfg.fleet_file);
        fix(&mut cfg.data.dir);
        fix(&mut cfg.output.report);
        fix(&mut cfg.output.dims);
        fix(&mut cfg.output.placement);
        fix(&mut cfg.output.sweep);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(q) = &o.query {
            self.query = None;
            self.query_file = Some(q.clone());
        }
        if let Some(f) = &o.fleet {
            self.machine.clear();
            self.fleet_file = Some(f.clone());
        }
        if let Some(w) = &o.weights {
            self.fleet_file = None;
            self.machine = MachineFleet::linear(w)
                .map(|f| f.machines().to_vec())
                .unwrap_or_default();
        }
        if let Some(d) = o.dist {
            self.data.distribution = d;
        }
        if o.theta.is_some() {
            self.data.theta = o.theta;
        }
        if o.n.is_some() {
            self.n = o.n;
        }
        if o.m.is_some() {
            self.data.m = o.m;
            self.data.cardinalities = None;
        }
        if o.cards.is_some() {
            self.data.cardinalities = o.cards.clone();
        }
        if o.plan.is_some() {
            self.plan = o.plan.clone();
        }
        if !o.seeds.is_empty() {
            self.seeds = o.seeds.clone();
        }
        if o.tolerance.is_some() {
            self.tolerance = o.tolerance;
        }
        if o.report.is_some() {
            self.output.report = o.report.clone();
        }
        if o.data_dir.is_some() {
            self.data.dir = o.data_dir.clone();
        }
    }

    /// Config file (if any) with the overrides applied, then resolved.
    pub fn assemble(o: &Overrides) -> Result<Experiment> {
        let mut cfg = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(o);
        cfg.resolve()
    }

    pub fn resolve(&self) -> Result<Experiment> {
        let text = match (&self.query, &self.query_file) {
            (Some(t), _) => t.clone(),
            (None, Some(p)) => {
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
            }
            (None, None) => bail!("no query: set `query`, `query_file` or --query"),
        };
        let query = Query::parse(&text).context("parsing query")?;
        let machines = if !self.machine.is_empty() {
            self.machine.clone()
        } else if let Some(p) = &self.fleet_file {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let fleet: MachineFleet =
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            fleet.machines().to_vec()
        } else {
            bail!("no fleet: add [[machine]] entries, `fleet_file`, --fleet or --weights")
        };
        let fleet = MachineFleet::new(machines).context("invalid fleet")?;
        let plan = match self.plan.as_deref() {
            None | Some("auto") => None,
            Some(s) => Some(s.parse::<PlanKind>()?),
        };
        let tolerance = self.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        ensure!(
            tolerance > 0.0 && tolerance < 1.0,
            "tolerance must lie in (0,1)"
        );
        let seeds = if self.seeds.is_empty() {
            vec![0]
        } else {
            self.seeds.clone()
        };
        let data = &self.data;
        let n = match (self.n, data.distribution) {
            (Some(n), _) => n,
            (None, DistKind::Files) => 0,
            (None, _) => bail!("no domain size: set `n` or --n"),
        };
        let cardinalities = match (&data.cardinalities, data.m) {
            (Some(c), _) => {
                ensure!(
                    c.len() == query.l(),
                    "{} cardinalities for {} atoms",
                    c.len(),
                    query.l()
                );
                Some(c.clone())
            }
            (None, Some(m)) => Some(vec![m; query.l()]),
            (None, None) => None,
        };
        if data.distribution == DistKind::Files {
            ensure!(data.dir.is_some(), "distribution `files` needs data.dir");
        }
        Ok(Experiment {
            query,
            fleet,
            n,
            plan,
            tolerance,
            seeds,
            distribution: data.distribution,
            theta: data.theta,
            cardinalities,
            data_dir: data.dir.clone(),
            output: self.output.clone(),
            sweep: self.sweep.clone(),
        })
    }
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub query: Query,
    pub fleet: MachineFleet,
    /// 0 until relation files are read.
    pub n: u64,
    /// `None` picks the plan from the instance.
    pub plan: Option<PlanKind>,
    pub tolerance: f64,
    pub seeds: Vec<u64>,
    pub distribution: DistKind,
    pub theta: Option<f64>,
    pub cardinalities: Option<Vec<u64>>,
    pub data_dir: Option<PathBuf>,
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
}

impl Experiment {
    fn dense_theta(&self) -> f64 {
        self.theta.unwrap_or(0.5)
    }

    pub fn instance(&self, seed: u64) -> Result<DatabaseInstance> {
        let q = &self.query;
        let inst = match self.distribution {
            DistKind::Matching => gen_matching(
                q,
                &MatchingSpec {
                    n: self.n,
                    cardinalities: self
                        .cardinalities
                        .clone()
                        .unwrap_or_else(|| vec![self.n; q.l()]),
                    theta: self.theta,
                    seed,
                },
            )?,
            DistKind::Dense | DistKind::Bernoulli => gen_dense(
                q,
                &DenseSpec {
                    n: self.n,
                    theta: self.dense_theta(),
                    seed,
                    bernoulli: self.distribution == DistKind::Bernoulli,
                },
            )?,
            DistKind::Files => self.read_files(seed)?,
        };
        inst.check(q)?;
        Ok(inst)
    }

    fn read_files(&self, seed: u64) -> Result<DatabaseInstance> {
        let dir = self.data_dir.as_ref().context("no data directory")?;
        let mut n = None;
        let mut relations = Vec::new();
        for atom in self.query.atoms() {
            let path = dir.join(format!("{}.csv", atom.name));
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let (rel, rn): (Relation, u64) =
                Relation::from_csv(&text).with_context(|| path.display().to_string())?;
            ensure!(
                rel.atom == atom.name,
                "{} holds atom {}",
                path.display(),
                rel.atom
            );
            ensure!(
                *n.get_or_insert(rn) == rn,
                "{}: n = {rn} differs from the other files",
                path.display()
            );
            relations.push(rel);
        }
        let n = n.expect("queries have atoms");
        ensure!(
            self.n == 0 || self.n == n,
            "files have n = {n}, config says {}",
            self.n
        );
        Ok(DatabaseInstance {
            n,
            relations,
            distribution: Distribution::External,
            seed,
        })
    }

    /// Schema for planning without data: configured cardinalities for
    /// matching inputs, `floor(theta n^r)` for dense ones, the files' sizes
    /// otherwise.
    pub fn schema(&self) -> Result<InstanceSchema> {
        let q = &self.query;
        let schema = match self.distribution {
            DistKind::Matching => InstanceSchema::for_query(
                q,
                self.n,
                self.cardinalities
                    .clone()
                    .unwrap_or_else(|| vec![self.n; q.l()]),
            )?,
            DistKind::Dense | DistKind::Bernoulli => {
                let theta = self.dense_theta();
                let cards = q
                    .arities()
                    .iter()
                    .map(|&r| ((theta * (self.n as f64).powi(r as i32)).floor() as u64).max(1))
                    .collect();
                InstanceSchema::for_query(q, self.n, cards)?
            }
            DistKind::Files => self.read_files(0)?.planning_schema(q)?,
        };
        Ok(schema)
    }

    pub fn plan_kind(&self, schema: &InstanceSchema) -> Result<PlanKind> {
        match self.plan {
            Some(k) => Ok(k),
            None => Ok(PlanKind::choose(&self.query, schema, &self.fleet)?),
        }
    }
}
