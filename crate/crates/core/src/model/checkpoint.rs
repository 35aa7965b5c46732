//! Text checkpoint format.
//!
//! ```text
//! factors <dtype> <n_users> <n_items> <dim> <seed> <config-hash-hex>
//! <n_users lines of dim space-separated user values>
//! <n_items lines of dim space-separated item values>
//! ```
//!
//! Values use the shortest round-trip decimal form, so a write/read cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{FactorModel, ModelError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub dtype: String,
    pub n_users: usize,
    pub n_items: usize,
    pub dim: usize,
    pub seed: u64,
    pub config_hash: u64,
}

pub fn render_checkpoint<F: Scalar>(model: &FactorModel<F>, seed: u64, config_hash: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "factors {} {} {} {} {} {:016x}",
        F::NAME,
        model.n_users(),
        model.n_items(),
        model.dim(),
        seed,
        config_hash
    );
    for m in [model.users(), model.items()] {
        for row in m.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
    }
    s
}

pub fn write_checkpoint<F: Scalar>(
    model: &FactorModel<F>,
    seed: u64,
    config_hash: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, render_checkpoint(model, seed, config_hash))?;
    Ok(())
}

pub fn parse_checkpoint<F: Scalar>(text: &str) -> Result<(FactorModel<F>, CheckpointHeader)> {
    let err = |line: usize, msg: &str| ModelError::Checkpoint {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines();
    let head: Vec<&str> = lines
        .next()
        .ok_or_else(|| err(1, "missing header"))?
        .split_whitespace()
        .collect();
    if head.len() != 7 || head[0] != "factors" {
        return Err(err(1, "malformed header"));
    }
    if head[1] != F::NAME {
        return Err(err(
            1,
            &format!("checkpoint holds {}, expected {}", head[1], F::NAME),
        ));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| err(1, "bad dimension"));
    let header = CheckpointHeader {
        dtype: head[1].to_string(),
        n_users: num(head[2])?,
        n_items: num(head[3])?,
        dim: num(head[4])?,
        seed: head[5].parse().map_err(|_| err(1, "bad seed"))?,
        config_hash: u64::from_str_radix(head[6], 16).map_err(|_| err(1, "bad config hash"))?,
    };

    let mut read = |rows: usize, first_line: usize| -> Result<Array2<F>> {
        let mut data = Vec::with_capacity(rows * header.dim);
        for r in 0..rows {
            let line_no = first_line + r;
            let line = lines.next().ok_or_else(|| err(line_no, "truncated"))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<F>().map_err(|_| err(line_no, "bad value"))?);
            }
            if data.len() - before != header.dim {
                return Err(err(line_no, "wrong row width"));
            }
        }
        Array2::from_shape_vec((rows, header.dim), data)
            .map_err(|e| err(first_line, &e.to_string()))
    };
    let users = read(header.n_users, 2)?;
    let items = read(header.n_items, 2 + header.n_users)?;
    Ok((FactorModel::from_parts(users, items)?, header))
}

pub fn read_checkpoint<F: Scalar>(
    path: impl AsRef<Path>,
) -> Result<(FactorModel<F>, CheckpointHeader)> {
    parse_checkpoint(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), nu in 1usize..5, ni in 1usize..5, d in 1usize..6) {
            let mut m: FactorModel<f64> = FactorModel::init(nu, ni, d, seed).unwrap();
            // push some awkward magnitudes through the formatter
            m.users_mut()[[0, 0]] = -1.0e-300 * (seed as f64 + 1.0);
            m.items_mut()[[0, 0]] = 1.0 / 3.0;
            let text = render_checkpoint(&m, seed, 0xdead_beef);
            let (back, h) = parse_checkpoint::<f64>(&text).unwrap();
            prop_assert_eq!(h.seed, seed);
            prop_assert_eq!(h.config_hash, 0xdead_beef);
            for (a, b) in m.users().iter().chain(m.items()).zip(back.users().iter().chain(back.items())) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn f32_round_trip_and_dtype_check() {
        let m: FactorModel<f32> = FactorModel::init(3, 2, 4, 9).unwrap();
        let text = render_checkpoint(&m, 9, 1);
        let (back, _) = parse_checkpoint::<f32>(&text).unwrap();
        assert_eq!(back, m);
        assert!(parse_checkpoint::<f64>(&text).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let m: FactorModel<f64> = FactorModel::init(3, 2, 2, 0).unwrap();
        let text = render_checkpoint(&m, 0, 0);
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            parse_checkpoint::<f64>(&cut),
            Err(ModelError::Checkpoint { line: 4, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.txt");
        let m: FactorModel<f64> = FactorModel::init(4, 5, 3, 2).unwrap();
        write_checkpoint(&m, 2, 77, &p).unwrap();
        let (back, h) = read_checkpoint::<f64>(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!((h.n_users, h.n_items, h.dim), (4, 5, 3));
    }
}
