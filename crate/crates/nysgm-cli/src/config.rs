//! Settings resolution: built-in defaults, then a flat `key=value` config
//! file, then command-line flags (flag wins).
//!
//! Config keys mirror the flag names: `n`, `csv`, `kernel`, `sigma`,
//! `degree`, `offset`, `kappa`, `m` (comma-separated), `trials`, `seed`,
//! `eta`, `theta`, `batch`, `iters`, `epochs`, `passes`, `regime`, `zeta`,
//! `gamma`, `c_eta`, `c_b`, `c_t`, `c_m`, `snapshot_stride`, `eval_points`,
//! `eval_mode`, `target`, `strategy`, `rtol`, `storage`, `grid`,
//! `truncation`, `val_frac`, `out`. Lines starting with `#` and blank
//! lines are ignored.
//!
//! Run length precedence: `iters` (absolute), else `passes` (per level:
//! `ceil(passes * m / batch)` iterations), else `epochs`
//! (`ceil(epochs * n / batch)`).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nysgm_core::{
    KernelSpec, LandmarkStrategy, Regime, RegimeMultipliers, StorageStrategy, TargetMode,
};

use crate::{CliError, CliResult};

/// Values supplied on the command line; `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub n: Option<usize>,
    pub csv: Option<PathBuf>,
    pub kernel: Option<String>,
    pub sigma: Option<f64>,
    pub degree: Option<u32>,
    pub offset: Option<f64>,
    pub kappa: Option<f64>,
    pub m: Vec<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub batch: Option<usize>,
    pub iters: Option<usize>,
    pub epochs: Option<f64>,
    pub passes: Option<f64>,
    pub regime: Option<String>,
    pub zeta: Option<f64>,
    pub gamma: Option<f64>,
    pub c_eta: Option<f64>,
    pub c_b: Option<f64>,
    pub c_t: Option<f64>,
    pub c_m: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub eval_points: Option<usize>,
    pub eval_mode: Option<String>,
    pub target: Option<String>,
    pub strategy: Option<String>,
    pub rtol: Option<f64>,
    pub storage: Option<String>,
    pub grid: Option<String>,
    pub truncation: Option<f64>,
    pub val_frac: Option<f64>,
    pub out: Option<PathBuf>,
}

/// Fully merged settings. Quantities that need the sample size to resolve
/// (default step-size, iteration count, snapshot stride) stay optional here
/// and are fixed by the experiment planner.
#[derive(Debug, Clone)]
pub struct Settings {
    pub n: usize,
    pub csv: Option<PathBuf>,
    pub kernel: KernelSpec,
    pub m: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub eta: Option<f64>,
    pub theta: f64,
    pub batch: usize,
    pub iters: Option<usize>,
    pub epochs: f64,
    pub passes: Option<f64>,
    pub regime: Option<Regime>,
    pub zeta: f64,
    pub gamma: f64,
    pub multipliers: RegimeMultipliers,
    pub snapshot_stride: Option<usize>,
    pub eval_points: usize,
    pub eval_random: bool,
    pub target: TargetMode,
    pub strategy: LandmarkStrategy,
    pub rtol: f64,
    pub storage: StorageStrategy,
    pub grid: Option<Vec<f64>>,
    pub truncation: f64,
    pub val_frac: f64,
    pub out: Option<PathBuf>,
}

/// Default number of data passes for explicit (non-regime) runs.
pub const DEFAULT_EPOCHS: f64 = 30.0;

/// The toy benchmark's default subsampling levels.
pub const DEFAULT_SUBSAMPLING_LEVELS: [usize; 6] = [2, 4, 6, 8, 10, 12];

pub fn load_config_file(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::validation(format!(
                "config {} line {}: expected key=value, got {line:?}",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "n",
    "csv",
    "kernel",
    "sigma",
    "degree",
    "offset",
    "kappa",
    "m",
    "trials",
    "seed",
    "eta",
    "theta",
    "batch",
    "iters",
    "epochs",
    "passes",
    "regime",
    "zeta",
    "gamma",
    "c_eta",
    "c_b",
    "c_t",
    "c_m",
    "snapshot_stride",
    "eval_points",
    "eval_mode",
    "target",
    "strategy",
    "rtol",
    "storage",
    "grid",
    "truncation",
    "val_frac",
    "out",
];

pub fn resolve(file: Option<&HashMap<String, String>>, flags: &Overrides) -> CliResult<Settings> {
    if let Some(map) = file {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::validation(format!("unknown config key {key:?}")));
            }
        }
    }
    let get = |key: &str| file.and_then(|m| m.get(key));

    let n = pick(flags.n, parse_opt(get("n"), "n")?).unwrap_or(100);
    let csv = flags.csv.clone().or_else(|| get("csv").map(PathBuf::from));

    let kernel_name = flags
        .kernel
        .clone()
        .or_else(|| get("kernel").cloned())
        .unwrap_or_else(|| "gaussian".to_string());
    let sigma = pick(flags.sigma, parse_opt(get("sigma"), "sigma")?).unwrap_or(0.2);
    let degree = pick(flags.degree, parse_opt(get("degree"), "degree")?).unwrap_or(2);
    let offset = pick(flags.offset, parse_opt(get("offset"), "offset")?).unwrap_or(1.0);
    let kappa = pick(flags.kappa, parse_opt(get("kappa"), "kappa")?).unwrap_or(1.0);
    let kernel = match kernel_name.as_str() {
        "gaussian" => KernelSpec::gaussian(sigma).map_err(|e| field_err("sigma", &e))?,
        "linear" => KernelSpec::linear(kappa).map_err(|e| field_err("kappa", &e))?,
        "polynomial" => KernelSpec::polynomial(degree, offset, kappa)
            .map_err(|e| field_err("degree/offset/kappa", &e))?,
        other => {
            return Err(CliError::validation(format!(
                "field kernel: unknown family {other:?} (gaussian, linear, polynomial)"
            )))
        }
    };

    let m = if !flags.m.is_empty() {
        flags.m.clone()
    } else if let Some(raw) = get("m") {
        parse_list::<usize>(raw, "m")?
    } else {
        Vec::new()
    };

    let regime = match flags.regime.clone().or_else(|| get("regime").cloned()) {
        Some(name) => Some(Regime::parse(&name).map_err(|e| field_err("regime", &e))?),
        None => None,
    };

    let target_name = flags
        .target
        .clone()
        .or_else(|| get("target").cloned())
        .unwrap_or_else(|| "noiseless".to_string());
    let target = TargetMode::parse(&target_name).map_err(|e| field_err("target", &e))?;

    let strategy = match flags
        .strategy
        .clone()
        .or_else(|| get("strategy").cloned())
        .unwrap_or_else(|| "first_m".to_string())
        .as_str()
    {
        "first_m" => LandmarkStrategy::FirstM,
        "uniform" => LandmarkStrategy::UniformWithoutReplacement,
        other => {
            return Err(CliError::validation(format!(
                "field strategy: unknown value {other:?} (first_m, uniform)"
            )))
        }
    };

    let storage = match flags
        .storage
        .clone()
        .or_else(|| get("storage").cloned())
        .unwrap_or_else(|| "precompute".to_string())
        .as_str()
    {
        "precompute" => StorageStrategy::PrecomputeCrossGram,
        "on_the_fly" => StorageStrategy::OnTheFly,
        other => {
            return Err(CliError::validation(format!(
                "field storage: unknown value {other:?} (precompute, on_the_fly)"
            )))
        }
    };

    let eval_random = match flags
        .eval_mode
        .clone()
        .or_else(|| get("eval_mode").cloned())
        .unwrap_or_else(|| "grid".to_string())
        .as_str()
    {
        "grid" => false,
        "random" => true,
        other => {
            return Err(CliError::validation(format!(
                "field eval_mode: unknown value {other:?} (grid, random)"
            )))
        }
    };

    let grid = match flags.grid.clone().or_else(|| get("grid").cloned()) {
        Some(raw) => Some(parse_list::<f64>(&raw, "grid")?),
        None => None,
    };

    let settings = Settings {
        n,
        csv,
        kernel,
        m,
        trials: pick(flags.trials, parse_opt(get("trials"), "trials")?).unwrap_or(50),
        seed: pick(flags.seed, parse_opt(get("seed"), "seed")?).unwrap_or(1),
        eta: pick(flags.eta, parse_opt(get("eta"), "eta")?),
        theta: pick(flags.theta, parse_opt(get("theta"), "theta")?).unwrap_or(0.0),
        batch: pick(flags.batch, parse_opt(get("batch"), "batch")?).unwrap_or(1),
        iters: pick(flags.iters, parse_opt(get("iters"), "iters")?),
        epochs: pick(flags.epochs, parse_opt(get("epochs"), "epochs")?).unwrap_or(DEFAULT_EPOCHS),
        passes: pick(flags.passes, parse_opt(get("passes"), "passes")?),
        regime,
        zeta: pick(flags.zeta, parse_opt(get("zeta"), "zeta")?).unwrap_or(0.0),
        gamma: pick(flags.gamma, parse_opt(get("gamma"), "gamma")?).unwrap_or(1.0),
        multipliers: RegimeMultipliers {
            c_eta: pick(flags.c_eta, parse_opt(get("c_eta"), "c_eta")?).unwrap_or(1.0),
            c_b: pick(flags.c_b, parse_opt(get("c_b"), "c_b")?).unwrap_or(1.0),
            c_t: pick(flags.c_t, parse_opt(get("c_t"), "c_t")?).unwrap_or(1.0),
            c_m: pick(flags.c_m, parse_opt(get("c_m"), "c_m")?).unwrap_or(1.0),
        },
        snapshot_stride: pick(
            flags.snapshot_stride,
            parse_opt(get("snapshot_stride"), "snapshot_stride")?,
        ),
        eval_points: pick(
            flags.eval_points,
            parse_opt(get("eval_points"), "eval_points")?,
        )
        .unwrap_or(2000),
        eval_random,
        target,
        strategy,
        rtol: pick(flags.rtol, parse_opt(get("rtol"), "rtol")?).unwrap_or(nysgm_core::DEFAULT_RTOL),
        storage,
        grid,
        truncation: pick(
            flags.truncation,
            parse_opt(get("truncation"), "truncation")?,
        )
        .unwrap_or(1.0),
        val_frac: pick(flags.val_frac, parse_opt(get("val_frac"), "val_frac")?).unwrap_or(0.2),
        out: flags.out.clone().or_else(|| get("out").map(PathBuf::from)),
    };

    if settings.trials == 0 {
        return Err(CliError::validation(
            "field trials: must be >= 1".to_string(),
        ));
    }
    if !(0.0..1.0).contains(&settings.val_frac) || settings.val_frac == 0.0 {
        return Err(CliError::validation(format!(
            "field val_frac: must lie in (0, 1), got {}",
            settings.val_frac
        )));
    }
    Ok(settings)
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn parse_opt<T: FromStr>(raw: Option<&String>, field: &str) -> CliResult<Option<T>> {
    match raw {
        None => Ok(None),
        Some(s) => s
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::validation(format!("field {field}: cannot parse {s:?}"))),
    }
}

fn parse_list<T: FromStr>(raw: &str, field: &str) -> CliResult<Vec<T>> {
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::validation(format!("field {field}: cannot parse {s:?}")))
        })
        .collect()
}

fn field_err(field: &str, e: &nysgm_core::Error) -> CliError {
    CliError::validation(format!("field {field}: {e}"))
}
