use crate::{EngineError, Result};

/// Contraction of a functional 0/1 tensor `I[i, j_1, .., j_D] = 1[i = f(j_1, .., j_D)]`
/// against one distribution per argument.
///
/// The tensor is stored as its function table: `table[t]` is the output index
/// for the `t`-th argument tuple in row-major order. Contracting against
/// arguments `x_1..x_D` gives `out_i = sum_{j: f(j) = i} prod_d x_d[j_d]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contraction {
    out_size: usize,
    arg_sizes: Vec<usize>,
    table: Vec<u32>,
}

impl Contraction {
    pub fn new(out_size: usize, arg_sizes: Vec<usize>, table: Vec<u32>) -> Result<Self> {
        if arg_sizes.is_empty() {
            return Err(EngineError::Contraction("at least one argument is required".into()));
        }
        if out_size == 0 || arg_sizes.iter().any(|&n| n == 0) {
            return Err(EngineError::Contraction("domain sizes must be positive".into()));
        }
        let tuples: usize = arg_sizes.iter().product();
        if table.len() != tuples {
            return Err(EngineError::Contraction(format!(
                "table has {} entries, expected {tuples}",
                table.len()
            )));
        }
        if let Some(pos) = table.iter().position(|&o| o as usize >= out_size) {
            return Err(EngineError::Contraction(format!(
                "table entry {pos} maps to {} outside output size {out_size}",
                table[pos]
            )));
        }
        Ok(Contraction { out_size, arg_sizes, table })
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn arg_sizes(&self) -> &[usize] {
        &self.arg_sizes
    }

    pub fn arity(&self) -> usize {
        self.arg_sizes.len()
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    /// Output index for a concrete argument tuple.
    pub fn apply(&self, args: &[usize]) -> usize {
        let mut t = 0;
        for (&a, &n) in args.iter().zip(&self.arg_sizes) {
            t = t * n + a;
        }
        self.table[t] as usize
    }

    pub(crate) fn forward_row(&self, args: &[&[f64]], out: &mut [f64]) {
        let d = self.arg_sizes.len();
        let last = self.arg_sizes[d - 1];
        let prefixes = self.table.len() / last;
        let mut idx = vec![0usize; d - 1];
        let tail = args[d - 1];
        for p in 0..prefixes {
            let mut prod = 1.0;
            for (e, &i) in idx.iter().enumerate() {
                prod *= args[e][i];
            }
            if prod != 0.0 {
                let row = &self.table[p * last..(p + 1) * last];
                for (&o, &x) in row.iter().zip(tail) {
                    out[o as usize] += prod * x;
                }
            }
            advance(&mut idx, &self.arg_sizes[..d - 1]);
        }
    }

    pub(crate) fn backward_row(&self, args: &[&[f64]], gout: &[f64], grads: &mut [Vec<f64>]) {
        let d = self.arg_sizes.len();
        let last = self.arg_sizes[d - 1];
        let prefixes = self.table.len() / last;
        let mut idx = vec![0usize; d - 1];
        let mut excl = vec![1.0; d - 1];
        let tail = args[d - 1];
        for p in 0..prefixes {
            // excl[e] = product of the prefix factors other than e
            let mut prod = 1.0;
            for e in 0..d - 1 {
                excl[e] = prod;
                prod *= args[e][idx[e]];
            }
            let mut suffix = 1.0;
            for e in (0..d - 1).rev() {
                excl[e] *= suffix;
                suffix *= args[e][idx[e]];
            }
            let row = &self.table[p * last..(p + 1) * last];
            let mut s = 0.0;
            {
                let gtail = &mut grads[d - 1];
                for (j, (&o, &x)) in row.iter().zip(tail).enumerate() {
                    let gv = gout[o as usize];
                    gtail[j] += gv * prod;
                    s += gv * x;
                }
            }
            if s != 0.0 {
                for e in 0..d - 1 {
                    grads[e][idx[e]] += s * excl[e];
                }
            }
            advance(&mut idx, &self.arg_sizes[..d - 1]);
        }
    }
}

fn advance(idx: &mut [usize], sizes: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < sizes[k] {
            return;
        }
        idx[k] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn add_mod(n: usize) -> Contraction {
        let table = (0..n * n).map(|t| ((t / n + t % n) % n) as u32).collect();
        Contraction::new(n, vec![n, n], table).unwrap()
    }

    #[test]
    fn table_entries_must_be_in_range() {
        assert!(Contraction::new(2, vec![2], vec![0, 2]).is_err());
        assert!(Contraction::new(2, vec![3], vec![0, 1]).is_err());
    }

    #[test]
    fn point_masses_select_function_value() {
        let c = add_mod(3);
        let mut out = vec![0.0; 3];
        c.forward_row(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], &mut out);
        assert_eq!(out, vec![0.0, 1.0, 0.0]);
        assert_eq!(c.apply(&[2, 2]), 1);
    }
}
