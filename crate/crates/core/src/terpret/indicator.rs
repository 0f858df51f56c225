use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use ntpt_engine::{Contraction, Tensor};

use super::domain::IntDomain;
use crate::error::{Error, Result};

/// Dense 0/1 tensor `I[i, j_1, .., j_D] = 1[i = f(j_1, .., j_D)]` for a total
/// integer function `f`, laid out with the output index first.
///
/// The function table used by the tape's `contract` primitive is kept
/// alongside the dense form.
#[derive(Clone)]
pub struct IndicatorTensor {
    name: String,
    in_domains: Vec<IntDomain>,
    out_domain: IntDomain,
    dense: Tensor,
    table: Arc<Contraction>,
}

impl IndicatorTensor {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.in_domains.len()
    }

    pub fn in_domains(&self) -> &[IntDomain] {
        &self.in_domains
    }

    pub fn out_domain(&self) -> IntDomain {
        self.out_domain
    }

    pub fn dense(&self) -> &Tensor {
        &self.dense
    }

    pub fn contraction(&self) -> &Arc<Contraction> {
        &self.table
    }

    /// Entry `I[out, args..]`.
    pub fn get(&self, out: usize, args: &[usize]) -> f64 {
        let mut idx = out;
        for (&a, d) in args.iter().zip(&self.in_domains) {
            idx = idx * d.size() + a;
        }
        self.dense.data()[idx]
    }

    /// The lifted function evaluated on concrete arguments.
    pub fn eval(&self, args: &[usize]) -> usize {
        self.table.apply(args)
    }
}

impl fmt::Debug for IndicatorTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndicatorTensor")
            .field("name", &self.name)
            .field("in_domains", &self.in_domains)
            .field("out_domain", &self.out_domain)
            .finish()
    }
}

/// Lift a total integer function to its indicator tensor.
pub fn lift(
    name: &str,
    f: impl Fn(&[usize]) -> usize,
    in_domains: &[IntDomain],
    out_domain: IntDomain,
) -> Result<IndicatorTensor> {
    if in_domains.is_empty() {
        return Err(Error::Domain(format!("`{name}` needs at least one argument")));
    }
    let sizes: Vec<usize> = in_domains.iter().map(|d| d.size()).collect();
    let tuples: usize = sizes.iter().product();
    let mut table = Vec::with_capacity(tuples);
    let mut args = vec![0usize; sizes.len()];
    for _ in 0..tuples {
        let value = f(&args);
        if !out_domain.contains(value) {
            return Err(Error::LiftOutOfRange {
                function: name.to_string(),
                args: args.clone(),
                value,
                size: out_domain.size(),
            });
        }
        table.push(value as u32);
        for k in (0..args.len()).rev() {
            args[k] += 1;
            if args[k] < sizes[k] {
                break;
            }
            args[k] = 0;
        }
    }
    let mut dense = vec![0.0; out_domain.size() * tuples];
    for (t, &o) in table.iter().enumerate() {
        dense[o as usize * tuples + t] = 1.0;
    }
    let mut shape = vec![out_domain.size()];
    shape.extend(&sizes);
    Ok(IndicatorTensor {
        name: name.to_string(),
        in_domains: in_domains.to_vec(),
        out_domain,
        dense: Tensor::new(shape, dense)?,
        table: Arc::new(Contraction::new(out_domain.size(), sizes, table)?),
    })
}

fn cache() -> &'static Mutex<HashMap<String, Arc<IndicatorTensor>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<IndicatorTensor>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// [`lift`] memoized by function name and domain signature. Only use for
/// functions whose name fully determines their behaviour.
pub fn lift_cached(
    name: &str,
    f: impl Fn(&[usize]) -> usize,
    in_domains: &[IntDomain],
    out_domain: IntDomain,
) -> Result<Arc<IndicatorTensor>> {
    let sizes: Vec<usize> = in_domains.iter().map(|d| d.size()).collect();
    let key = format!("{name}{sizes:?}->{}", out_domain.size());
    if let Some(hit) = cache().lock().expect("indicator cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let lifted = Arc::new(lift(name, f, in_domains, out_domain)?);
    cache().lock().expect("indicator cache poisoned").insert(key, lifted.clone());
    Ok(lifted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: usize) -> IntDomain {
        IntDomain::new(n).unwrap()
    }

    #[test]
    fn add_mod_three_indicator() {
        let i = lift("add", |a| (a[0] + a[1]) % 3, &[d(3), d(3)], d(3)).unwrap();
        assert_eq!(i.get(2, &[1, 1]), 1.0);
        assert_eq!(i.get(0, &[1, 1]), 0.0);
        assert_eq!(i.dense().shape(), &[3, 3, 3]);
    }

    #[test]
    fn identity_is_identity_matrix() {
        let i = lift("id", |a| a[0], &[d(4)], d(4)).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(i.get(r, &[c]), if r == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn out_of_range_names_the_tuple() {
        let err = lift("bad", |a| a[0] + a[1], &[d(2), d(3)], d(3)).unwrap_err();
        match err {
            Error::LiftOutOfRange { args, value, .. } => {
                assert_eq!(args, vec![1, 2]);
                assert_eq!(value, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_tuple_has_exactly_one_output() {
        let i = lift("f", |a| (a[0] * 7 + a[1] * 3) % 5, &[d(4), d(6)], d(5)).unwrap();
        for j in 0..4 {
            for k in 0..6 {
                let ones: f64 = (0..5).map(|o| i.get(o, &[j, k])).sum();
                assert_eq!(ones, 1.0);
            }
        }
    }

    #[test]
    fn cached_lifts_are_shared() {
        let a = lift_cached("cache-test-mod", |a| a[0] % 2, &[d(5)], d(2)).unwrap();
        let b = lift_cached("cache-test-mod", |a| a[0] % 2, &[d(5)], d(2)).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
