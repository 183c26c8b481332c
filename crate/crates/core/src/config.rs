//! Plain-text `key = value` configuration.
//!
//! One entry per line, `#` starts a comment, keys are case-insensitive.
//! Lists are comma separated (`0.2, 0.4, 0.6`) or inclusive ranges
//! `start:end:step` (`40:240:20`). A document whose first non-blank
//! character is `{` is read as JSON instead.
//!
//! Experiment keys: `topology` (star | tree | serial), `m`, `R`, `K`,
//! `sweep` (which of them is swept, inferred when only one is a list),
//! `p_grid`, `q`, `solver` (omp | iht | cosamp | lasso), `lambda_policy`
//! (`relative:F`, `absolute:V` or a bare factor), `debias`, `max_iters`,
//! `tol`, `iht_step` (`fixed:MU` | normalized), `trials`, `seed`, `sigma`,
//! `N`, `s`, `threshold`, `workers`, `ensemble`, `amplitude`, `noise`,
//! `normalization`.
//!
//! ```
//! let cfg = lossycs::config::parse_experiment("
//!     topology = star
//!     m = 40:120:40
//!     p_grid = 0.5, 1.0
//!     trials = 10
//! ").unwrap();
//! assert_eq!(cfg.template.values, vec![40, 80, 120]);
//! ```

use std::collections::BTreeMap;

use crate::experiment::{Axis, ExperimentConfig, Solver, TopologyKind, TopologyTemplate};
use crate::recovery::{CosampParams, IhtParams, IhtStep, LambdaPolicy};
use crate::sensing::{AmplitudeLaw, EnsembleFamily, NoiseLaw, Normalization};
use crate::topology::{ErasureParams, Topology};
use crate::{Error, Result};

/// Parsed `key = value` pairs with lower-cased keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            let key = k.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            Some(k) => Err(Error::config(format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{}'", v.trim())))
}

/// Integer list or inclusive range `a:b:step`.
pub fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>> {
    if let Some((a, b, step)) = split_range(v) {
        let (a, b, step): (usize, usize, usize) = (parse_one(key, a)?, parse_one(key, b)?, parse_one(key, step)?);
        if step == 0 || b < a {
            return Err(Error::config(format!("{key}: range needs step > 0 and end >= start")));
        }
        return Ok((a..=b).step_by(step).collect());
    }
    v.split(',').map(|x| parse_one(key, x)).collect()
}

/// Float list or inclusive range `a:b:step`. Range points are rounded to
/// 12 decimals so `0.1:0.3:0.1` yields exactly `[0.1, 0.2, 0.3]`.
pub fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if let Some((a, b, step)) = split_range(v) {
        let (a, b, step): (f64, f64, f64) = (parse_one(key, a)?, parse_one(key, b)?, parse_one(key, step)?);
        if !(step > 0.0) || !(b >= a) {
            return Err(Error::config(format!("{key}: range needs step > 0 and end >= start")));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count)
            .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    v.split(',').map(|x| parse_one(key, x)).collect()
}

fn split_range(v: &str) -> Option<(&str, &str, &str)> {
    let mut it = v.split(':');
    match (it.next(), it.next(), it.next(), it.next()) {
        (Some(a), Some(b), Some(c), None) => Some((a, b, c)),
        _ => None,
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn parse_choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T> {
    let lower = v.to_ascii_lowercase();
    options
        .iter()
        .find(|(name, _)| *name == lower)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::config(format!("{key}: '{v}' is not one of {}", names.join(", ")))
        })
}

pub fn parse_topology_kind(v: &str) -> Result<TopologyKind> {
    parse_choice(
        "topology",
        v,
        &[
            ("star", TopologyKind::Star),
            ("tree", TopologyKind::Tree),
            ("serial", TopologyKind::Serial),
            ("serial_star", TopologyKind::Serial),
            ("serial-star", TopologyKind::Serial),
        ],
    )
}

pub fn parse_lambda_policy(v: &str) -> Result<LambdaPolicy> {
    let key = "lambda_policy";
    match v.split_once(':') {
        Some((kind, x)) => match kind.trim().to_ascii_lowercase().as_str() {
            "relative" => Ok(LambdaPolicy::Relative(parse_one(key, x)?)),
            "absolute" => Ok(LambdaPolicy::Absolute(parse_one(key, x)?)),
            other => Err(Error::config(format!("{key}: unknown policy '{other}'"))),
        },
        None => Ok(LambdaPolicy::Relative(parse_one(key, v)?)),
    }
}

fn parse_iht_step(v: &str) -> Result<IhtStep> {
    if v.eq_ignore_ascii_case("normalized") {
        return Ok(IhtStep::Normalized);
    }
    let x = v.split_once(':').map_or(v, |(kind, x)| {
        if kind.trim().eq_ignore_ascii_case("fixed") {
            x
        } else {
            v
        }
    });
    Ok(IhtStep::Fixed(parse_one("iht_step", x)?))
}

fn single(key: &str, values: &[usize]) -> Result<usize> {
    match values {
        [v] => Ok(*v),
        _ => Err(Error::config(format!("{key} must be a single value"))),
    }
}

/// Reads an experiment from `key = value` text or JSON.
pub fn parse_experiment(text: &str) -> Result<ExperimentConfig> {
    if text.trim_start().starts_with('{') {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid JSON config: {e}")))?;
        cfg.validate()?;
        return Ok(cfg);
    }
    let mut kv = KeyValues::parse(text)?;
    let kind = parse_topology_kind(
        &kv.take("topology")
            .ok_or_else(|| Error::config("missing key 'topology'"))?,
    )?;
    let p_grid = parse_f64_list(
        "p_grid",
        &kv.take("p_grid").ok_or_else(|| Error::config("missing key 'p_grid'"))?,
    )?;
    let q = kv.take("q").map(|v| parse_one("q", &v)).transpose()?.unwrap_or(1.0);
    let m = kv.take("m").map(|v| parse_usize_list("m", &v)).transpose()?;
    let r = kv.take("r").map(|v| parse_usize_list("R", &v)).transpose()?;
    let k = kv.take("k").map(|v| parse_usize_list("K", &v)).transpose()?;
    let sweep = kv
        .take("sweep")
        .map(|v| parse_choice("sweep", &v, &[("m", Axis::M), ("r", Axis::R), ("k", Axis::K)]))
        .transpose()?;

    let template = match kind {
        TopologyKind::Star => {
            if r.is_some() || k.is_some() {
                return Err(Error::config("a star network takes m, not R or K"));
            }
            if matches!(sweep, Some(a) if a != Axis::M) {
                return Err(Error::config("a star grid sweeps m"));
            }
            TopologyTemplate::star(m.ok_or_else(|| Error::config("missing key 'm'"))?)
        }
        TopologyKind::Tree | TopologyKind::Serial => {
            if m.is_some() {
                return Err(Error::config("tree and serial networks take R and K, not m"));
            }
            let r = r.ok_or_else(|| Error::config("missing key 'R'"))?;
            let k = k.ok_or_else(|| Error::config("missing key 'K'"))?;
            let axis = match sweep {
                Some(Axis::M) => return Err(Error::config("tree and serial grids sweep R or K")),
                Some(a) => a,
                None if r.len() > 1 && k.len() > 1 => return Err(Error::config("only one of R and K may be a list")),
                None if r.len() > 1 => Axis::R,
                None => Axis::K,
            };
            let (values, fixed) = match axis {
                Axis::R => (r, single("K", &k)?),
                _ => (k, single("R", &r)?),
            };
            TopologyTemplate {
                kind,
                axis,
                values,
                fixed: Some(fixed),
                q: if kind == TopologyKind::Tree { q } else { 1.0 },
            }
        }
    };
    if kind != TopologyKind::Tree && q != 1.0 {
        return Err(Error::config("q applies to tree networks only"));
    }

    let mut cfg = ExperimentConfig::with_template(template, p_grid);
    let solver_name = kv.take("solver").unwrap_or_else(|| "lasso".into());
    let lambda = kv.take("lambda_policy");
    let debias = kv.take("debias");
    let max_iters = kv
        .take("max_iters")
        .map(|v| parse_one::<usize>("max_iters", &v))
        .transpose()?;
    let tol = kv.take("tol").map(|v| parse_one::<f64>("tol", &v)).transpose()?;
    let iht_step = kv.take("iht_step");
    let lasso_only = |name: &str| -> Result<()> {
        if lambda.is_some() || debias.is_some() {
            return Err(Error::config(format!(
                "lambda_policy and debias apply to lasso, not {name}"
            )));
        }
        Ok(())
    };
    cfg.solver = match solver_name.to_ascii_lowercase().as_str() {
        "omp" => {
            lasso_only("omp")?;
            if max_iters.is_some() || tol.is_some() || iht_step.is_some() {
                return Err(Error::config("omp takes no iteration settings"));
            }
            Solver::Omp
        }
        "iht" => {
            lasso_only("iht")?;
            let mut p = IhtParams::default();
            if let Some(v) = &iht_step {
                p.step = parse_iht_step(v)?;
            }
            p.max_iters = max_iters.unwrap_or(p.max_iters);
            p.tol = tol.unwrap_or(p.tol);
            Solver::Iht(p)
        }
        "cosamp" => {
            lasso_only("cosamp")?;
            let mut p = CosampParams::default();
            p.max_iters = max_iters.unwrap_or(p.max_iters);
            p.tol = tol.unwrap_or(p.tol);
            Solver::Cosamp(p)
        }
        "lasso" => {
            if iht_step.is_some() {
                return Err(Error::config("iht_step applies to iht only"));
            }
            let Solver::Lasso(mut p) = Solver::default() else {
                unreachable!()
            };
            if let Some(v) = &lambda {
                p.lambda = parse_lambda_policy(v)?;
            }
            if let Some(v) = &debias {
                p.debias = parse_bool("debias", v)?;
            }
            p.max_iters = max_iters.unwrap_or(p.max_iters);
            p.tol = tol.unwrap_or(p.tol);
            Solver::Lasso(p)
        }
        other => return Err(Error::config(format!("solver: unknown solver '{other}'"))),
    };

    if let Some(v) = kv.take("trials") {
        cfg.trials = parse_one("trials", &v)?;
    }
    if let Some(v) = kv.take("seed") {
        cfg.seed = parse_one("seed", &v)?;
    }
    if let Some(v) = kv.take("sigma") {
        cfg.sigma = parse_one("sigma", &v)?;
    }
    if let Some(v) = kv.take("n") {
        cfg.n = parse_one("N", &v)?;
    }
    if let Some(v) = kv.take("s") {
        cfg.s = parse_one("s", &v)?;
    }
    if let Some(v) = kv.take("threshold") {
        cfg.threshold = parse_one("threshold", &v)?;
    }
    if let Some(v) = kv.take("workers") {
        cfg.workers = Some(parse_one("workers", &v)?);
    }
    if let Some(v) = kv.take("ensemble") {
        cfg.ensemble = parse_choice(
            "ensemble",
            &v,
            &[
                ("gaussian", EnsembleFamily::Gaussian),
                ("rademacher", EnsembleFamily::Rademacher),
                ("uniform_sym", EnsembleFamily::UniformSym),
            ],
        )?;
    }
    if let Some(v) = kv.take("amplitude") {
        cfg.amplitude = parse_choice(
            "amplitude",
            &v,
            &[
                ("unit_sign", AmplitudeLaw::UnitSign),
                ("standard_normal", AmplitudeLaw::StandardNormal),
            ],
        )?;
    }
    if let Some(v) = kv.take("noise") {
        cfg.noise = parse_choice(
            "noise",
            &v,
            &[
                ("uniform", NoiseLaw::Uniform),
                ("truncated_normal", NoiseLaw::TruncatedNormal),
            ],
        )?;
    }
    if let Some(v) = kv.take("normalization") {
        cfg.normalization = parse_choice(
            "normalization",
            &v,
            &[
                ("none", Normalization::None),
                ("inv_sqrt", Normalization::InvSqrt),
                ("inverse", Normalization::Inverse),
            ],
        )?;
    }
    kv.finish()?;
    cfg.validate()?;
    Ok(cfg)
}

/// A single network with its erasure parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologyRecord {
    pub topology: Topology,
    pub params: ErasureParams<f64>,
}

/// Reads `topology`, `m` (star) or `R` and `K`, `p`, and `q` (tree, default 1).
pub fn parse_topology_record(text: &str) -> Result<TopologyRecord> {
    let mut kv = KeyValues::parse(text)?;
    let kind = parse_topology_kind(
        &kv.take("topology")
            .ok_or_else(|| Error::config("missing key 'topology'"))?,
    )?;
    let get = |kv: &mut KeyValues, key: &str, label: &str| -> Result<usize> {
        parse_one(
            label,
            &kv.take(key)
                .ok_or_else(|| Error::config(format!("missing key '{label}'")))?,
        )
    };
    let topology = match kind {
        TopologyKind::Star => Topology::star(get(&mut kv, "m", "m")?)?,
        TopologyKind::Tree => {
            let r = get(&mut kv, "r", "R")?;
            Topology::tree(r, get(&mut kv, "k", "K")?)?
        }
        TopologyKind::Serial => {
            let r = get(&mut kv, "r", "R")?;
            Topology::serial_star(r, get(&mut kv, "k", "K")?)?
        }
    };
    let p: f64 = parse_one("p", &kv.take("p").ok_or_else(|| Error::config("missing key 'p'"))?)?;
    let q: f64 = kv.take("q").map(|v| parse_one("q", &v)).transpose()?.unwrap_or(1.0);
    kv.finish()?;
    let params = ErasureParams::new(p, q).map_err(|e| Error::config(e.to_string()))?;
    Ok(TopologyRecord { topology, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(
            parse_usize_list("m", "40:240:40").unwrap(),
            vec![40, 80, 120, 160, 200, 240]
        );
        assert_eq!(parse_f64_list("p", "0.1:0.3:0.1").unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(parse_f64_list("p", "0.2:1.0:0.1").unwrap().len(), 9);
        assert_eq!(parse_f64_list("p", "0.5, 1").unwrap(), vec![0.5, 1.0]);
        assert!(parse_usize_list("m", "10:5:1").is_err());
    }

    #[test]
    fn tree_sweeps_the_list_axis() {
        let cfg =
            parse_experiment("topology = tree\nR = 1\nK = 5:40:5\nq = 0.7\np_grid = 1\nsolver = omp # fast\n").unwrap();
        assert_eq!(cfg.template.axis, Axis::K);
        assert_eq!(cfg.template.fixed, Some(1));
        assert_eq!(cfg.template.q, 0.7);
        assert_eq!(cfg.solver, Solver::Omp);
    }

    #[test]
    fn lasso_settings() {
        let cfg =
            parse_experiment("topology=star\nm=40\np_grid=0.5\nlambda_policy=absolute:0.05\ndebias=false\nN=50\ns=3")
                .unwrap();
        match cfg.solver {
            Solver::Lasso(p) => {
                assert_eq!(p.lambda, LambdaPolicy::Absolute(0.05));
                assert!(!p.debias);
            }
            _ => panic!(),
        }
        assert_eq!((cfg.n, cfg.s), (50, 3));
    }

    #[test]
    fn errors_are_config_errors() {
        for bad in [
            "topology=star\nm=40\n",
            "topology=star\nm=40\np_grid=0.5\nbogus=1",
            "topology=ring\nm=40\np_grid=0.5",
            "topology=star\nm=80,40\np_grid=0.5",
            "topology=star\nm=40\np_grid=0.5\ntrials=0",
            "topology=tree\nR=1,2\nK=3,4\np_grid=0.5",
            "topology=star\nm=40\np_grid=0.5\nsolver=omp\ndebias=true",
            "topology=star\nm=40\np_grid=0.5\nm=50",
            "no equals sign",
        ] {
            let e = parse_experiment(bad).unwrap_err();
            assert!(e.is_config(), "{bad}: {e}");
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = parse_experiment("topology=serial\nR=5\nK=1:10:1\np_grid=0.5,0.9\nsolver=cosamp").unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_experiment(&json).unwrap(), cfg);
    }

    #[test]
    fn topology_records() {
        let r = parse_topology_record("topology=tree\nR=3\nK=4\np=0.5\nq=0.7").unwrap();
        assert_eq!(
            r.topology,
            Topology::Tree {
                relays: 3,
                per_relay: 4
            }
        );
        assert_eq!(r.params.q, 0.7);
        assert!(parse_topology_record("topology=star\nm=0\np=0.5").is_err());
        assert!(parse_topology_record("topology=star\nm=4\np=1.5")
            .unwrap_err()
            .is_config());
    }
}
