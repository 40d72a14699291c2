//! Scene files and the `mlk` command line: each run writes `<name>.csv` and
//! `<name>.manifest.json` into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dirvol::{directed_volume_fiber, directed_volume_surface};
use crate::error::{Error, Result};
use crate::geom::Tube;
use crate::hamsandwich::{bisection_search, BisectionProblem, DEFAULT_TOLERANCE};
use crate::kakeya::{joint_volume, kakeya_ratio, volume_trace, Generator, TraceOptions, TubeScene};
use crate::measure::{SampleBudget, DEFAULT_LINES, DEFAULT_VOLUME_SAMPLES};
use crate::planiness::{build_box_field, sigma_sweep, BoxOptions};
use crate::poly::stone_tukey_degree;
use crate::region::Shape;
use crate::surface::Surface;
use crate::visibility::{
    default_directions, find_high_visibility_surface, visibility_with, SearchOptions, VisTarget,
};

pub const SCENE_VERSION: u32 = 1;

/// Experiment parameters; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Directed-volume directions for `dirvol`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma: Vec<f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

/// Input file shared by every subcommand; each reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Tube-scene recipe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    /// Explicit tube families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<Vec<Tube>>>,
    /// Bounded tubes for `boxes`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tubes: Vec<Tube>,
    /// Sets to bisect, or regions to measure.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sets: Vec<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<Surface>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<VisTarget>,
    #[serde(default)]
    pub params: Params,
}

impl SceneFile {
    /// Parse JSON text; `origin` names the file in errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut scene: SceneFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("{origin}:{}:{}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        scene.normalize()?;
        scene.validate()?;
        Ok(scene)
    }

    /// Rescale tube directions to unit length; files may give any non-zero
    /// direction.
    fn normalize(&mut self) -> Result<()> {
        let fix = |t: &mut Tube, what: String| -> Result<()> {
            *t = Tube::new(
                t.family,
                t.core_point.clone(),
                t.direction.clone(),
                t.radius,
                t.length,
            )
            .map_err(|e| Error::Validation(format!("{what}: {}", detail(&e))))?;
            Ok(())
        };
        for (i, t) in self.tubes.iter_mut().enumerate() {
            fix(t, format!("tubes[{i}]"))?;
        }
        if let Some(fams) = &mut self.families {
            for (j, f) in fams.iter_mut().enumerate() {
                for (a, t) in f.iter_mut().enumerate() {
                    fix(t, format!("families[{j}][{a}]"))?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Normalised JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// SHA-256 of the normalised form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENE_VERSION {
            return Err(Error::Validation(format!(
                "version: expected {SCENE_VERSION}, got {}",
                self.version
            )));
        }
        if self.n == 0 {
            return Err(Error::Validation("n: must be positive".into()));
        }
        let dim = |what: &str, d: usize| {
            if d == self.n {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{what}: dimension {d}, expected {}",
                    self.n
                )))
            }
        };
        for (i, s) in self.sets.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::Validation(format!("sets[{i}]: {}", detail(&e))))?;
            dim(&format!("sets[{i}]"), crate::region::Region::dim(s))?;
        }
        for (i, t) in self.targets.iter().enumerate() {
            t.region
                .validate()
                .map_err(|e| Error::Validation(format!("targets[{i}]: {}", detail(&e))))?;
            dim(
                &format!("targets[{i}]"),
                crate::region::Region::dim(&t.region),
            )?;
        }
        for (i, t) in self.tubes.iter().enumerate() {
            t.validate()
                .map_err(|e| Error::Validation(format!("tubes[{i}]: {}", detail(&e))))?;
            dim(&format!("tubes[{i}]"), t.dim())?;
        }
        if let Some(fams) = &self.families {
            for (j, f) in fams.iter().enumerate() {
                for (a, t) in f.iter().enumerate() {
                    t.validate().map_err(|e| {
                        Error::Validation(format!("families[{j}][{a}]: {}", detail(&e)))
                    })?;
                    dim(&format!("families[{j}][{a}]"), t.dim())?;
                }
            }
        }
        if let Some(s) = &self.surface {
            dim("surface", s.dim())?;
        }
        for (i, v) in self.params.vectors.iter().enumerate() {
            dim(&format!("params.vectors[{i}]"), v.len())?;
        }
        Ok(())
    }

    /// The tube scene from `families` (needs `S`) or `generator`.
    pub fn tube_scene(&self) -> Result<TubeScene> {
        match (&self.families, &self.generator) {
            (Some(f), None) => {
                let side = self.side.ok_or_else(|| {
                    Error::Validation("S: required with explicit families".into())
                })?;
                TubeScene::new(self.n, side, self.seed, f.clone())
                    .map_err(|e| Error::Validation(format!("families: {}", detail(&e))))
            }
            (None, Some(g)) => g.build(self.n, self.seed),
            (Some(_), Some(_)) => Err(Error::Validation(
                "give either families or generator, not both".into(),
            )),
            (None, None) => Err(Error::Validation("families or generator: required".into())),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mlk",
    version,
    about = "Polynomial partitioning and multilinear Kakeya experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scene file (JSON).
    #[arg(long, global = true)]
    pub scene: Option<PathBuf>,
    /// Overrides the scene seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Fibres per directed-volume estimate.
    #[arg(long, global = true)]
    pub lines: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Bisect every set with one polynomial.
    Hamsandwich {
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Directed volumes of the surface in each region.
    Dirvol,
    /// Visibility of the surface in each region.
    Visibility,
    /// Search for a surface meeting visibility targets.
    Vissearch {
        #[arg(long)]
        degree_cap: Option<usize>,
    },
    /// Tube-scene experiments.
    Kakeya {
        #[command(subcommand)]
        which: KakeyaCmd,
    },
    /// Box field and containment sweep for bounded tubes.
    Boxes {
        /// Length scale; overrides `params.L`.
        #[arg(long = "L")]
        l: Option<f64>,
        /// Comma-separated dilations.
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum KakeyaCmd {
    /// Volume of the joint intersection.
    T1,
    /// Lattice functional against its transversality bound.
    T2,
    /// The staged volume argument.
    Trace,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Hamsandwich { .. } => "hamsandwich",
            Command::Dirvol => "dirvol",
            Command::Visibility => "visibility",
            Command::Vissearch { .. } => "vissearch",
            Command::Kakeya { which } => match which {
                KakeyaCmd::T1 => "kakeya_t1",
                KakeyaCmd::T2 => "kakeya_t2",
                KakeyaCmd::Trace => "kakeya_trace",
            },
            Command::Boxes { .. } => "boxes",
        }
    }
}

/// Report rows; every row starts with the seed and scene hash.
struct Report {
    seed: u64,
    hash: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Failure to surface after the report is written.
    failure: Option<Error>,
}

impl Report {
    fn new(seed: u64, hash: &str, columns: &[&str]) -> Self {
        let mut header = vec!["seed".to_string(), "scene_hash".to_string()];
        header.extend(columns.iter().map(|c| c.to_string()));
        Report {
            seed,
            hash: hash.to_string(),
            header,
            rows: Vec::new(),
            failure: None,
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        let mut r = vec![self.seed.to_string(), self.hash.clone()];
        r.extend(cells);
        debug_assert_eq!(r.len(), self.header.len());
        self.rows.push(r);
    }

    fn csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn vec_cell(v: &[f64]) -> String {
    v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(";")
}

/// Error text without the variant prefix.
fn detail(e: &Error) -> String {
    match e {
        Error::Validation(m) | Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Outcome of one invocation.
#[derive(Debug)]
pub struct RunOutcome {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub failure: Option<Error>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    scene: Option<String>,
    scene_hash: &'a str,
    seed: u64,
    samples: usize,
    lines: usize,
    threads: Option<usize>,
    version: &'a str,
    wall_time_s: f64,
    csv: String,
    rows: usize,
    status: String,
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<RunOutcome> {
    let start = Instant::now();
    let path = cli
        .common
        .scene
        .as_ref()
        .ok_or_else(|| Error::Validation("--scene: required".into()))?;
    let mut scene = SceneFile::load(path)?;
    if let Some(s) = cli.common.seed {
        scene.seed = s;
    }
    let hash = scene.hash();
    let samples = cli
        .common
        .samples
        .or(scene.params.samples)
        .unwrap_or(DEFAULT_VOLUME_SAMPLES);
    let lines = cli
        .common
        .lines
        .or(scene.params.lines)
        .unwrap_or(DEFAULT_LINES / 16);
    if samples == 0 || lines == 0 {
        return Err(Error::Validation(
            "samples and lines must be positive".into(),
        ));
    }
    let ctx = Ctx {
        scene: &scene,
        hash: &hash,
        samples,
        lines,
    };
    let work = || ctx.dispatch(&cli.command);
    let report = match cli.common.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(work),
        None => work(),
    }?;

    std::fs::create_dir_all(&cli.common.out)?;
    let name = cli.command.name();
    let csv = cli.common.out.join(format!("{name}.csv"));
    let manifest = cli.common.out.join(format!("{name}.manifest.json"));
    std::fs::write(&csv, report.csv())?;
    let m = Manifest {
        subcommand: name,
        scene: Some(path.display().to_string()),
        scene_hash: &hash,
        seed: scene.seed,
        samples,
        lines,
        threads: cli.common.threads,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        csv: csv.display().to_string(),
        rows: report.rows.len(),
        status: report
            .failure
            .as_ref()
            .map_or("ok".to_string(), |e| e.to_string()),
    };
    std::fs::write(
        &manifest,
        serde_json::to_string_pretty(&m).expect("manifest serializes"),
    )?;
    Ok(RunOutcome {
        csv,
        manifest,
        failure: report.failure,
    })
}

struct Ctx<'a> {
    scene: &'a SceneFile,
    hash: &'a str,
    samples: usize,
    lines: usize,
}

impl Ctx<'_> {
    fn budget(&self) -> SampleBudget {
        SampleBudget::new(self.scene.seed, self.samples)
    }

    fn line_budget(&self) -> SampleBudget {
        SampleBudget::new(self.scene.seed, self.lines).stratified()
    }

    fn surface(&self) -> Result<Box<dyn crate::surface::Hypersurface>> {
        self.scene
            .surface
            .as_ref()
            .ok_or_else(|| Error::Validation("surface: required".into()))?
            .build()
    }

    fn regions(&self) -> Result<&[Shape]> {
        if self.scene.sets.is_empty() {
            return Err(Error::Validation("sets: required".into()));
        }
        Ok(&self.scene.sets)
    }

    fn dispatch(&self, cmd: &Command) -> Result<Report> {
        match cmd {
            Command::Hamsandwich { degree } => self
                .hamsandwich(*degree)
                .map_err(|e| e.at_stage("hamsandwich")),
            Command::Dirvol => self.dirvol().map_err(|e| e.at_stage("dirvol")),
            Command::Visibility => self.visibility().map_err(|e| e.at_stage("visibility")),
            Command::Vissearch { degree_cap } => self
                .vissearch(*degree_cap)
                .map_err(|e| e.at_stage("visibility")),
            Command::Kakeya { which } => self.kakeya(*which).map_err(|e| e.at_stage("kakeya")),
            Command::Boxes { l, sigma } => self
                .boxes(*l, sigma.clone())
                .map_err(|e| e.at_stage("planiness")),
        }
    }

    fn hamsandwich(&self, degree: Option<usize>) -> Result<Report> {
        let sets = self.regions()?.to_vec();
        let d = degree
            .or(self.scene.params.degree)
            .unwrap_or_else(|| stone_tukey_degree(self.scene.n, sets.len()));
        let tol = self.scene.params.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        let problem = BisectionProblem::new(sets, d, tol)?;
        let res = bisection_search(&problem, &self.budget())?;
        let mut rep = Report::new(
            self.scene.seed,
            self.hash,
            &["degree", "set", "defect", "success"],
        );
        for (i, x) in res.defects.iter().enumerate() {
            rep.row(vec![
                d.to_string(),
                i.to_string(),
                f(*x),
                res.success.to_string(),
            ]);
        }
        if !res.success {
            rep.failure = Some(
                Error::Stalled {
                    restarts: problem.restarts,
                    max_defect: res.max_defect(),
                }
                .at_stage("hamsandwich"),
            );
        }
        Ok(rep)
    }

    fn dirvol(&self) -> Result<Report> {
        let z = self.surface()?;
        let n = self.scene.n;
        let vectors = if self.scene.params.vectors.is_empty() {
            (0..n)
                .map(|i| (0..n).map(|k| f64::from(u8::from(k == i))).collect())
                .collect()
        } else {
            self.scene.params.vectors.clone()
        };
        let mut rep = Report::new(
            self.scene.seed,
            self.hash,
            &["region", "v", "fiber", "fiber_se", "surface", "surface_se"],
        );
        for (i, region) in self.regions()?.iter().enumerate() {
            for v in &vectors {
                let fib = directed_volume_fiber(z.as_ref(), region, v, &self.line_budget());
                let srf = directed_volume_surface(z.as_ref(), region, v, &self.budget())?;
                rep.row(vec![
                    i.to_string(),
                    vec_cell(v),
                    f(fib.value),
                    f(fib.std_error),
                    f(srf.value),
                    f(srf.std_error),
                ]);
            }
        }
        Ok(rep)
    }

    fn visibility(&self) -> Result<Report> {
        let z = self.surface()?;
        let mut rep = Report::new(
            self.scene.seed,
            self.hash,
            &["region", "vis", "body_volume", "john_volume"],
        );
        for (i, region) in self.regions()?.iter().enumerate() {
            let dirs = self
                .scene
                .params
                .directions
                .unwrap_or_else(|| default_directions(self.scene.n));
            let r = visibility_with(z.as_ref(), region, dirs, &self.line_budget())?;
            rep.row(vec![
                i.to_string(),
                f(r.vis),
                f(r.body.volume()),
                f(r.john.volume()),
            ]);
        }
        Ok(rep)
    }

    fn vissearch(&self, degree_cap: Option<usize>) -> Result<Report> {
        if self.scene.targets.is_empty() {
            return Err(Error::Validation("targets: required".into()));
        }
        let cap = degree_cap
            .or(self.scene.params.degree_cap)
            .ok_or_else(|| Error::Validation("degree_cap: required".into()))?;
        let mut opts = SearchOptions::default();
        if let Some(d) = self.scene.params.directions {
            opts.directions = d;
        }
        let out =
            find_high_visibility_surface(&self.scene.targets, cap, &opts, &self.line_budget())?;
        let mut rep = Report::new(
            self.scene.seed,
            self.hash,
            &["target", "m", "achieved", "ratio", "degree", "success"],
        );
        for (i, row) in out.table.iter().enumerate() {
            rep.row(vec![
                i.to_string(),
                f(row.target),
                f(row.achieved),
                f(row.ratio),
                out.degree.to_string(),
                out.success.to_string(),
            ]);
        }
        if !out.success {
            rep.failure = Some(
                Error::BudgetExhausted {
                    best_ratio: out.min_ratio(),
                }
                .at_stage("visibility"),
            );
        }
        Ok(rep)
    }

    fn kakeya(&self, which: KakeyaCmd) -> Result<Report> {
        let scene = self.scene.tube_scene()?;
        let n = scene.n;
        let counts = scene.counts();
        let a_cols: Vec<String> = (1..=n).map(|j| format!("A{j}")).collect();
        let a_vals: Vec<String> = counts.iter().map(|a| a.to_string()).collect();
        let cols = |rest: &[&str]| -> Vec<String> {
            let mut c = vec!["n".to_string()];
            c.extend(a_cols.iter().cloned());
            c.extend(rest.iter().map(|s| s.to_string()));
            c
        };
        let lead = || {
            let mut c = vec![n.to_string()];
            c.extend(a_vals.iter().cloned());
            c
        };
        match which {
            KakeyaCmd::T1 => {
                let header = cols(&["volume", "std_error", "volume_over_a_power"]);
                let h: Vec<&str> = header.iter().map(String::as_str).collect();
                let mut rep = Report::new(self.scene.seed, self.hash, &h);
                let v = joint_volume(&scene, &self.budget())?;
                let a = counts.iter().copied().max().unwrap_or(0) as f64;
                let scale = a.powf(n as f64 / (n as f64 - 1.0));
                let mut row = lead();
                row.extend([
                    f(v.value),
                    f(v.std_error),
                    f(if scale > 0.0 { v.value / scale } else { 0.0 }),
                ]);
                rep.row(row);
                Ok(rep)
            }
            KakeyaCmd::T2 => {
                let header = cols(&["theta", "lhs", "rhs_core", "ratio"]);
                let h: Vec<&str> = header.iter().map(String::as_str).collect();
                let mut rep = Report::new(self.scene.seed, self.hash, &h);
                let r = kakeya_ratio(&scene)?;
                let mut row = lead();
                row.extend([f(r.theta), f(r.lhs), f(r.rhs_core), f(r.ratio)]);
                rep.row(row);
                Ok(rep)
            }
            KakeyaCmd::Trace => {
                let opts = TraceOptions {
                    max_degree: self.scene.params.degree_cap,
                    lines: self.lines,
                    ..TraceOptions::default()
                };
                let t = volume_trace(&scene, &opts, &self.budget())?;
                let mut rep =
                    Report::new(self.scene.seed, self.hash, &["stage", "quantity", "value"]);
                let mut put =
                    |stage: &str, q: &str, v: String| rep.row(vec![stage.into(), q.into(), v]);
                put("cubes", "V", t.v.to_string());
                put("cubes", "A", t.a.to_string());
                put("bisect", "degree", t.degree.to_string());
                put("bisect", "degree_over_root", f(t.degree_ratio));
                put("bisect", "max_defect", f(t.max_defect));
                put("assign", "cubes_assigned", t.assignments.len().to_string());
                put("pigeonhole", "popular_family", t.popular.0.to_string());
                put("pigeonhole", "popular_tube", t.popular.1.to_string());
                put("pigeonhole", "popular_count", t.popular_count.to_string());
                put("pigeonhole", "required", t.required.to_string());
                put("enlarge", "radius", f(t.enlarged_radius));
                put("enlarge", "directed_volume", f(t.enlarged_volume));
                put("enlarge", "directed_volume_se", f(t.enlarged_error));
                put("enlarge", "min_vk", f(t.min_vk));
                put("enlarge", "sum_vk", f(t.sum_vk));
                put("enlarge", "cylinder_bound", f(t.cylinder));
                put("enlarge", "chain_holds", t.chain_holds.to_string());
                put("result", "v_over_a", f(t.lhs));
                put("result", "v_root", f(t.rhs));
                put("result", "c_measured", f(t.c_measured));
                put("result", "holds", t.holds.to_string());
                Ok(rep)
            }
        }
    }

    fn boxes(&self, l: Option<f64>, sigma: Option<Vec<f64>>) -> Result<Report> {
        if self.scene.tubes.is_empty() {
            return Err(Error::Validation("tubes: required".into()));
        }
        let l = l
            .or(self.scene.params.l)
            .ok_or_else(|| Error::Validation("L: required".into()))?;
        let sigmas = sigma.unwrap_or_else(|| {
            if self.scene.params.sigma.is_empty() {
                vec![5.0, 10.0, 20.0, 40.0]
            } else {
                self.scene.params.sigma.clone()
            }
        });
        let field = build_box_field(&self.scene.tubes, l, &BoxOptions::default(), &self.budget())?;
        let per = SampleBudget::new(self.scene.seed, self.samples.min(1000));
        let mut rep = Report::new(
            self.scene.seed,
            self.hash,
            &["tube", "sigma", "fraction", "sigma_star"],
        );
        for (i, t) in self.scene.tubes.iter().enumerate() {
            let sw = sigma_sweep(
                std::slice::from_ref(t),
                &field,
                &sigmas,
                &per.child(i as u64),
            )?;
            for (s, fr) in sw.sigmas.iter().zip(&sw.fractions) {
                rep.row(vec![i.to_string(), f(*s), f(*fr), f(sw.sigma_star)]);
            }
        }
        let all = sigma_sweep(&self.scene.tubes, &field, &sigmas, &per)?;
        for (s, fr) in all.sigmas.iter().zip(&all.fractions) {
            rep.row(vec!["all".into(), f(*s), f(*fr), f(all.sigma_star)]);
        }
        Ok(rep)
    }
}

/// Process exit code for an error: 2 for input problems, 3 for failures
/// inside an experiment.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Parse { .. } | Error::Validation(_) | Error::Io(_) => 2,
        _ if matches!(e, Error::Stage { .. }) => 3,
        Error::InvalidArgument(_) => 2,
        _ => 3,
    }
}

/// Parse arguments, run, print errors, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => match out.failure {
            None => 0,
            Some(e) => {
                eprintln!("mlk: {e}");
                3
            }
        },
        Err(e) => {
            eprintln!("mlk: {e}");
            exit_code(&e)
        }
    }
}
