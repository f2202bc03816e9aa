//! Network checkpoints: a small text format holding the architecture, λ
//! values and the flat parameter list at 17 significant digits, which is
//! enough for an exact decimal→binary round trip.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Architecture, Network};

const MAGIC: &str = "pinn-checkpoint v1";

pub fn save_checkpoint(net: &Network, params: &[f64], path: &Path) -> Result<()> {
    if params.len() != net.param_count() {
        return Err(Error::structural(format!(
            "parameter vector has {} entries, network needs {}",
            params.len(),
            net.param_count()
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let sizes: Vec<String> = net
        .arch
        .layer_sizes()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let _ = writeln!(out, "arch {}", sizes.join(" "));
    let _ = writeln!(out, "lambda {}", net.n_lambda);
    for v in &params[net.arch.param_count()..] {
        let _ = writeln!(out, "{v:.16e}");
    }
    let _ = writeln!(out, "theta {}", net.arch.param_count());
    for v in &params[..net.arch.param_count()] {
        let _ = writeln!(out, "{v:.16e}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Network, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let malformed = |what: &str| Error::structural(format!("malformed checkpoint: {what}"));
    let header = lines.next().ok_or_else(|| malformed("empty file"))?;
    if header.trim() != MAGIC {
        return Err(Error::structural(format!(
            "checkpoint version mismatch: {header:?}"
        )));
    }
    let arch_line = lines.next().ok_or_else(|| malformed("missing arch"))?;
    let sizes: Vec<usize> = arch_line
        .strip_prefix("arch ")
        .ok_or_else(|| malformed("bad arch line"))?
        .split_whitespace()
        .map(|v| v.parse().map_err(|_| malformed("bad arch size")))
        .collect::<Result<_>>()?;
    let arch = Architecture::new(sizes)?;
    let lambda_line = lines.next().ok_or_else(|| malformed("missing lambda"))?;
    let n_lambda: usize = lambda_line
        .strip_prefix("lambda ")
        .ok_or_else(|| malformed("bad lambda line"))?
        .trim()
        .parse()
        .map_err(|_| malformed("bad lambda count"))?;
    let mut lambda = Vec::with_capacity(n_lambda);
    for _ in 0..n_lambda {
        let line = lines.next().ok_or_else(|| malformed("missing lambda value"))?;
        lambda.push(parse_value(line)?);
    }
    let theta_line = lines.next().ok_or_else(|| malformed("missing theta"))?;
    let n_theta: usize = theta_line
        .strip_prefix("theta ")
        .ok_or_else(|| malformed("bad theta line"))?
        .trim()
        .parse()
        .map_err(|_| malformed("bad theta count"))?;
    if n_theta != arch.param_count() {
        return Err(Error::structural(format!(
            "checkpoint size mismatch: theta {} vs architecture {}",
            n_theta,
            arch.param_count()
        )));
    }
    let mut theta = Vec::with_capacity(n_theta + n_lambda);
    for _ in 0..n_theta {
        let line = lines.next().ok_or_else(|| malformed("truncated theta"))?;
        theta.push(parse_value(line)?);
    }
    if lines.next().is_some_and(|l| !l.trim().is_empty()) {
        return Err(malformed("trailing content"));
    }
    theta.extend(lambda);
    Ok((Network::new(arch, n_lambda), theta))
}

fn parse_value(line: &str) -> Result<f64> {
    let v: f64 = line
        .trim()
        .parse()
        .map_err(|_| Error::structural(format!("malformed checkpoint value {line:?}")))?;
    if !v.is_finite() {
        return Err(Error::structural("non-finite checkpoint value"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_reproduces_forward_outputs_bitwise() {
        let dir = std::env::temp_dir().join("pinn-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt");
        let net = Network::new(Architecture::new(vec![2, 13, 7, 1]).unwrap(), 2);
        let mut params = net.init(3);
        let slots = net.lambda_slots();
        params[slots.start] = 0.987654321;
        params[slots.start + 1] = 0.0031830988618379;
        save_checkpoint(&net, &params, &path).unwrap();
        let (net2, params2) = load_checkpoint(&path).unwrap();
        assert_eq!(net2.arch.layer_sizes(), net.arch.layer_sizes());
        assert_eq!(net2.n_lambda, 2);
        assert_eq!(params.len(), params2.len());
        for (a, b) in params.iter().zip(&params2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut g = Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let u = net.build(&mut g, &[t, x]).unwrap()[0];
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..10 {
            let pt = [rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0)];
            let a = g.eval(u, &params, &pt).unwrap();
            let b = g.eval(u, &params2, &pt).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn checkpoint_of_identify_network_has_expected_entry_count() {
        let dir = std::env::temp_dir().join("pinn-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("count.ckpt");
        let net = Network::new(Architecture::with_hidden(2, 8, 20, 1).unwrap(), 2);
        let params = net.init(0);
        save_checkpoint(&net, &params, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let numeric = text
            .lines()
            .filter(|l| l.parse::<f64>().is_ok())
            .count();
        assert_eq!(numeric, 3021 + 2);
    }

    #[test]
    fn truncated_and_mismatched_files_are_rejected() {
        let dir = std::env::temp_dir().join("pinn-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.ckpt");
        let net = Network::new(Architecture::new(vec![1, 4, 1]).unwrap(), 0);
        let params = net.init(0);
        save_checkpoint(&net, &params, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // truncate
        let short: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, short).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Structural(_))));
        // version mismatch
        let bad = text.replacen("v1", "v9", 1);
        std::fs::write(&path, bad).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Structural(_))));
        // size mismatch
        let bad2 = text.replacen("theta 13", "theta 12", 1);
        std::fs::write(&path, bad2).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Structural(_))));
    }
}
