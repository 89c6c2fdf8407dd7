//! OSPA distance between finite sets of states, on the position components.

use crate::assignment::assignment_min_cost;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaParams {
    pub order: f64,
    pub cutoff: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self { order: 2.0, cutoff: 100.0 }
    }
}

/// Total OSPA and its localization / cardinality parts, with
/// `total^p = localization^p + cardinality^p`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ospa {
    pub total: f64,
    pub localization: f64,
    pub cardinality: f64,
}

fn position(x: &Vector) -> nalgebra::DVectorView<'_, f64> {
    x.rows(0, x.len().min(3))
}

/// Euclidean distance between the position parts of two states.
pub fn position_distance(a: &Vector, b: &Vector) -> f64 {
    (position(a) - position(b)).norm()
}

pub fn ospa(x: &[Vector], y: &[Vector], params: &OspaParams) -> Ospa {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let m = small.len();
    let n = large.len();
    if n == 0 {
        return Ospa::default();
    }
    let p = params.order;
    let c = params.cutoff;
    let cost = Matrix::from_fn(m, n, |i, j| position_distance(&small[i], &large[j]).min(c).powf(p));
    let loc_sum = assignment_min_cost(&cost).cost;
    let card_sum = c.powf(p) * (n - m) as f64;
    let nf = n as f64;
    Ospa {
        total: ((loc_sum + card_sum) / nf).powf(1.0 / p),
        localization: (loc_sum / nf).powf(1.0 / p),
        cardinality: (card_sum / nf).powf(1.0 / p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64, z: f64) -> Vector {
        Vector::from_vec(vec![x, y, z])
    }

    #[test]
    fn examples() {
        let p = OspaParams::default();
        let a = vec![pt(1.0, 2.0, 3.0), pt(-4.0, 0.0, 9.0)];
        assert_eq!(ospa(&a, &a, &p).total, 0.0);
        assert_eq!(ospa(&[], &[pt(1.0, 1.0, 1.0)], &p).total, 100.0);
        assert_eq!(ospa(&[pt(0.0, 0.0, 0.0)], &[pt(3.0, 4.0, 0.0)], &p).total, 5.0);
        let o = ospa(&[pt(0.0, 0.0, 0.0)], &[pt(0.0, 0.0, 0.0), pt(500.0, 0.0, 0.0)], &p);
        assert!((o.total - 100.0 / 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(o.localization, 0.0);
        assert_eq!(ospa(&[], &[], &p), Ospa::default());
    }

    #[test]
    fn velocity_is_ignored() {
        let a = Vector::from_vec(vec![1.0, 2.0, 3.0, 10.0, 0.0, 0.0]);
        let b = Vector::from_vec(vec![1.0, 2.0, 3.0, -5.0, 1.0, 2.0]);
        assert_eq!(ospa(&[a], &[b], &OspaParams::default()).total, 0.0);
    }

    #[test]
    fn cutoff_saturates_localization() {
        let o = ospa(&[pt(0.0, 0.0, 0.0)], &[pt(1000.0, 0.0, 0.0)], &OspaParams::default());
        assert_eq!(o.total, 100.0);
        assert_eq!(o.cardinality, 0.0);
    }
}
