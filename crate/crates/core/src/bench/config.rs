//! Flat `key = value` suite configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::solvers::{SolverKind, StopCriteria};

use super::{Generator, LipschitzChoice, ProblemSpec, SolverSpec, SuiteSpec};

/// Everything needed to build a [`SuiteSpec`]; every field has a default.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub generator: Generator,
    /// `(n, m)` size pairs.
    pub pairs: Vec<(usize, usize)>,
    pub matrices: usize,
    pub starts: usize,
    pub density: f64,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub alpha: f64,
    pub tol_op: f64,
    pub tol_vec: f64,
    pub k_max: usize,
    pub tau_max: f64,
    pub tau_points: usize,
    pub lipschitz: LipschitzChoice,
}

impl Default for SuiteConfig {
    /// The desk-scale protocol: three square pairs, ten matrices, three
    /// starts, the six explicit methods, `k_max = 2·10⁴`.
    fn default() -> Self {
        Self {
            generator: Generator::Random,
            pairs: vec![(20, 20), (40, 40), (60, 60)],
            matrices: 10,
            starts: 3,
            density: 0.5,
            seed: 7,
            solvers: SolverKind::EXPERIMENT.to_vec(),
            alpha: 3.0,
            tol_op: 1e-6,
            tol_vec: 1e-5,
            k_max: 20_000,
            tau_max: 10.0,
            tau_points: 200,
            lipschitz: LipschitzChoice::Estimate,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, val: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    val.parse::<T>()
        .map_err(|e| Error::Config(format!("{key} = {val}: {e}")))
}

fn parse_pairs(val: &str) -> Result<Vec<(usize, usize)>> {
    val.split(',')
        .map(|p| {
            let (n, m) = p
                .trim()
                .split_once('x')
                .ok_or_else(|| Error::Config(format!("pair '{p}' is not of the form NxM")))?;
            Ok((parse_num("pairs", n.trim())?, parse_num("pairs", m.trim())?))
        })
        .collect()
}

impl SuiteConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, val) = (key.trim(), val.trim());
            if seen.insert(key.to_string(), i + 1).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", i + 1)));
            }
            cfg.set(key, val)?;
        }
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, val: &str) -> Result<()> {
        match key {
            "generator" => {
                self.generator = match val {
                    "random" => Generator::Random,
                    "ouyang-xu" => Generator::OuyangXu,
                    _ => {
                        return Err(Error::Config(format!(
                            "generator must be random or ouyang-xu, got '{val}'"
                        )))
                    }
                }
            }
            "pairs" => self.pairs = parse_pairs(val)?,
            "matrices" => self.matrices = parse_num(key, val)?,
            "starts" => self.starts = parse_num(key, val)?,
            "density" => self.density = parse_num(key, val)?,
            "seed" => self.seed = parse_num(key, val)?,
            "solvers" => {
                self.solvers = val
                    .split(',')
                    .map(|s| s.trim().parse::<SolverKind>())
                    .collect::<Result<_>>()
                    .map_err(|e| Error::Config(e.to_string()))?
            }
            "alpha" => self.alpha = parse_num(key, val)?,
            "tol_op" => self.tol_op = parse_num(key, val)?,
            "tol_vec" => self.tol_vec = parse_num(key, val)?,
            "k_max" => self.k_max = parse_num(key, val)?,
            "tau_max" => self.tau_max = parse_num(key, val)?,
            "tau_points" => self.tau_points = parse_num(key, val)?,
            "lipschitz" => {
                self.lipschitz = if val == "estimate" {
                    LipschitzChoice::Estimate
                } else {
                    LipschitzChoice::Fixed(parse_num(key, val)?)
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Fully resolved configuration, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let pairs: Vec<String> = self.pairs.iter().map(|(n, m)| format!("{n}x{m}")).collect();
        let solvers: Vec<&str> = self.solvers.iter().map(|k| k.id()).collect();
        let generator = match self.generator {
            Generator::Random => "random",
            Generator::OuyangXu => "ouyang-xu",
        };
        let lipschitz = match self.lipschitz {
            LipschitzChoice::Estimate => "estimate".to_string(),
            LipschitzChoice::Fixed(l) => l.to_string(),
        };
        let _ = writeln!(s, "generator = {generator}");
        let _ = writeln!(s, "pairs = {}", pairs.join(","));
        let _ = writeln!(s, "matrices = {}", self.matrices);
        let _ = writeln!(s, "starts = {}", self.starts);
        let _ = writeln!(s, "density = {}", self.density);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "solvers = {}", solvers.join(","));
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "tol_op = {:e}", self.tol_op);
        let _ = writeln!(s, "tol_vec = {:e}", self.tol_vec);
        let _ = writeln!(s, "k_max = {}", self.k_max);
        let _ = writeln!(s, "tau_max = {}", self.tau_max);
        let _ = writeln!(s, "tau_points = {}", self.tau_points);
        let _ = writeln!(s, "lipschitz = {lipschitz}");
        s
    }

    /// Expands the configuration into concrete problems and solvers. Matrix
    /// and start seeds are drawn in order from a generator seeded with
    /// `seed`.
    pub fn build(&self) -> Result<SuiteSpec> {
        if self.pairs.is_empty() || self.matrices == 0 || self.starts == 0 {
            return Err(Error::Config("suite needs pairs, matrices and starts".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("suite needs at least one solver".into()));
        }
        if !(self.tau_max >= 1.0) || self.tau_points < 2 {
            return Err(Error::Config("need tau_max >= 1 and tau_points >= 2".into()));
        }
        let stop = StopCriteria::new(self.tol_op, self.tol_vec, self.k_max)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut problems = Vec::new();
        for (pi, &(n, m)) in self.pairs.iter().enumerate() {
            if self.generator == Generator::OuyangXu && n != m {
                return Err(Error::Config(format!(
                    "structured instances are square, got pair {n}x{m}"
                )));
            }
            for a in 0..self.matrices {
                let matrix_seed: u64 = rng.random();
                for st in 0..self.starts {
                    let start_seed: u64 = rng.random();
                    problems.push(ProblemSpec {
                        id: format!("p{pi}_{n}x{m}_a{a}_s{st}"),
                        generator: self.generator,
                        n,
                        m,
                        density: self.density,
                        matrix_seed,
                        start_seed,
                    });
                }
            }
        }
        let solvers = self
            .solvers
            .iter()
            .map(|&kind| SolverSpec {
                id: kind.id().to_string(),
                kind,
                alpha: self.alpha,
                step_scale: None,
            })
            .collect();
        let spec = SuiteSpec {
            problems,
            solvers,
            stop,
            lipschitz: self.lipschitz,
            keep_logs: false,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_desk_scale() {
        let spec = SuiteConfig::default().build().unwrap();
        assert_eq!(spec.problems.len(), 90);
        assert_eq!(spec.solvers.len(), 6);
        assert_eq!(spec.stop.k_max, 20_000);
    }

    #[test]
    fn parse_and_resolve_round_trip() {
        let text = "# small suite\npairs = 5x3, 6x6\nmatrices = 2\nstarts = 1\nseed = 11 # trailing\nsolvers = eg, fast-ogda-explicit\nlipschitz = 1\n";
        let cfg = SuiteConfig::parse(text).unwrap();
        assert_eq!(cfg.pairs, vec![(5, 3), (6, 6)]);
        assert_eq!(cfg.lipschitz, LipschitzChoice::Fixed(1.0));
        assert_eq!(SuiteConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(cfg.build().unwrap().problems.len(), 4);
    }

    #[test]
    fn parse_errors() {
        assert!(SuiteConfig::parse("bogus = 1").is_err());
        assert!(SuiteConfig::parse("seed 1").is_err());
        assert!(SuiteConfig::parse("seed = x").is_err());
        assert!(SuiteConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(SuiteConfig::parse("solvers = eg, newton").is_err());
        assert!(SuiteConfig::parse("pairs = 20").is_err());
        assert!(SuiteConfig::parse("matrices = 0").unwrap().build().is_err());
    }
}
