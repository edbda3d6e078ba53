use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result};

/// Affine map `z -> multiplier ⊙ z + offset` with a diagonal multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanElement {
    pub multiplier: Vec<f64>,
    pub offset: Vec<f64>,
}

impl ScanElement {
    pub fn identity(n: usize) -> Self {
        Self {
            multiplier: vec![1.0; n],
            offset: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.multiplier.len()
    }
}

/// `earlier` followed by `later`: `(a'a, a'b + b')`.
pub fn compose(earlier: &ScanElement, later: &ScanElement) -> ScanElement {
    let multiplier = later
        .multiplier
        .iter()
        .zip(&earlier.multiplier)
        .map(|(a2, a1)| a2 * a1)
        .collect();
    let offset = later
        .multiplier
        .iter()
        .zip(&earlier.offset)
        .zip(&later.offset)
        .map(|((a2, b1), b2)| a2 * b1 + b2)
        .collect();
    ScanElement { multiplier, offset }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanSchedule {
    /// Left fold; identical arithmetic to the plain recurrence.
    Sequential,
    /// Blelloch up-sweep/down-sweep tree.
    Tree,
}

/// Inclusive prefix compositions: entry `k` is `e_k ∘ ... ∘ e_0`.
pub fn parallel_scan(elements: &[ScanElement], schedule: ScanSchedule) -> Result<Vec<ScanElement>> {
    let Some(first) = elements.first() else {
        return Ok(Vec::new());
    };
    let n = first.dim();
    for e in elements {
        check_len("scan multiplier", n, e.multiplier.len())?;
        check_len("scan offset", n, e.offset.len())?;
    }
    Ok(match schedule {
        ScanSchedule::Sequential => {
            let mut out = Vec::with_capacity(elements.len());
            out.push(first.clone());
            for e in &elements[1..] {
                let next = compose(out.last().unwrap(), e);
                out.push(next);
            }
            out
        }
        ScanSchedule::Tree => blelloch(elements, n),
    })
}

fn blelloch(elements: &[ScanElement], n: usize) -> Vec<ScanElement> {
    let len = elements.len();
    let size = len.next_power_of_two();
    let mut a: Vec<ScanElement> = elements.to_vec();
    a.resize(size, ScanElement::identity(n));
    let mut stride = 1;
    while stride < size {
        let mut k = 0;
        while k < size {
            let left = k + stride - 1;
            let right = k + 2 * stride - 1;
            a[right] = compose(&a[left], &a[right]);
            k += 2 * stride;
        }
        stride *= 2;
    }
    a[size - 1] = ScanElement::identity(n);
    stride = size / 2;
    while stride >= 1 {
        let mut k = 0;
        while k < size {
            let left = k + stride - 1;
            let right = k + 2 * stride - 1;
            let t = a[left].clone();
            a[left] = a[right].clone();
            a[right] = compose(&a[right], &t);
            k += 2 * stride;
        }
        stride /= 2;
    }
    a.truncate(len);
    a.iter()
        .zip(elements)
        .map(|(excl, e)| compose(excl, e))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn element(m: &[f64], b: &[f64]) -> ScanElement {
        ScanElement {
            multiplier: m.to_vec(),
            offset: b.to_vec(),
        }
    }

    #[test]
    fn sequential_is_the_recurrence() {
        let es = vec![element(&[0.5], &[1.0]), element(&[0.25], &[2.0]), element(&[2.0], &[-1.0])];
        let out = parallel_scan(&es, ScanSchedule::Sequential).unwrap();
        let mut z = 0.0;
        for (e, o) in es.iter().zip(&out) {
            z = e.multiplier[0] * z + e.offset[0];
            assert_eq!(o.offset[0], z);
        }
        assert!(parallel_scan(&[], ScanSchedule::Tree).unwrap().is_empty());
    }

    #[test]
    fn identity_is_neutral() {
        let e = element(&[0.3, -2.0], &[1.0, 4.0]);
        let id = ScanElement::identity(2);
        assert_eq!(compose(&id, &e), e);
        assert_eq!(compose(&e, &id), e);
    }

    proptest! {
        #[test]
        fn tree_matches_sequential(raw in proptest::collection::vec((-1.2f64..1.2, -3.0f64..3.0, -1.2f64..1.2, -3.0f64..3.0), 1..70)) {
            let es: Vec<ScanElement> = raw.iter().map(|(a, b, c, d)| element(&[*a, *c], &[*b, *d])).collect();
            let s = parallel_scan(&es, ScanSchedule::Sequential).unwrap();
            let t = parallel_scan(&es, ScanSchedule::Tree).unwrap();
            for (x, y) in s.iter().zip(&t) {
                for (p, q) in x.offset.iter().zip(&y.offset).chain(x.multiplier.iter().zip(&y.multiplier)) {
                    prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
                }
            }
        }

        #[test]
        fn compose_is_associative(v in proptest::collection::vec(-2.0f64..2.0, 6)) {
            let (a, b, c) = (element(&[v[0]], &[v[1]]), element(&[v[2]], &[v[3]]), element(&[v[4]], &[v[5]]));
            let l = compose(&compose(&a, &b), &c);
            let r = compose(&a, &compose(&b, &c));
            prop_assert!((l.offset[0] - r.offset[0]).abs() < 1e-12);
            prop_assert!((l.multiplier[0] - r.multiplier[0]).abs() < 1e-12);
        }
    }
}
