use std::f64::consts::{PI, SQRT_2};

use crate::pde::Profile1D;
use crate::process::LatticeConfig;

/// Mode coordinates `Y(e_j)`, `j = 1..J`, of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub time: f64,
    pub y: Vec<f64>,
}

/// Tabulated `e_j(x/N)` for repeated projections at fixed `N` and `J`.
#[derive(Debug, Clone)]
pub struct ModeProjector {
    n: usize,
    j_max: usize,
    // table[(j - 1) * (N - 1) + (x - 1)] = e_j(x / N)
    table: Vec<f64>,
}

impl ModeProjector {
    pub fn new(n: usize, j_max: usize) -> Self {
        assert!(n >= 2 && j_max >= 1);
        let nf = n as f64;
        let table = (1..=j_max)
            .flat_map(|j| (1..n).map(move |x| SQRT_2 * (PI * (j * x) as f64 / nf).sin()))
            .collect();
        Self { n, j_max, table }
    }

    pub fn modes(&self) -> usize {
        self.j_max
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `e_j(x / N)` for `x = 1..N-1`.
    pub fn mode(&self, j: usize) -> &[f64] {
        let m = self.n - 1;
        &self.table[(j - 1) * m..j * m]
    }

    /// `N^{-1/2} sum_x e_j(x/N) (eta(x) - centering(x))` for every `j`.
    pub fn project(&self, config: &LatticeConfig, centering: &Profile1D, time: f64) -> FieldSample {
        assert_eq!(config.size(), self.n);
        assert_eq!(centering.size(), self.n);
        let dev: Vec<f64> = config
            .occupancies()
            .iter()
            .zip(centering.interior())
            .map(|(&e, c)| e as f64 - c)
            .collect();
        let scale = 1.0 / (self.n as f64).sqrt();
        let y = (1..=self.j_max)
            .map(|j| scale * self.mode(j).iter().zip(&dev).map(|(e, d)| e * d).sum::<f64>())
            .collect();
        FieldSample { time, y }
    }
}

/// One-off projection; use [`ModeProjector`] in loops.
pub fn project_field(config: &LatticeConfig, centering: &Profile1D, j_max: usize) -> FieldSample {
    ModeProjector::new(config.size(), j_max).project(config, centering, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::BoundaryParams;

    #[test]
    fn exact_centering_gives_zero() {
        let occ = vec![1, 0, 0, 1, 1];
        let config = LatticeConfig::new(6, occ.clone()).unwrap();
        let mut vals = vec![0.5];
        vals.extend(occ.iter().map(|&v| v as f64));
        vals.push(0.5);
        let centering = Profile1D::new(vals).unwrap();
        assert!(project_field(&config, &centering, 5).y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn four_site_hand_value() {
        let config = LatticeConfig::new(4, vec![1, 0, 0]).unwrap();
        let centering = Profile1D::linear(4, &BoundaryParams::new(0.0, 1.0).unwrap());
        let y = project_field(&config, &centering, 1).y[0];
        let s = |a: f64| a.sin();
        let expect = 0.5 * SQRT_2 * (s(PI / 4.0) * 0.75 + s(PI / 2.0) * -0.5 + s(3.0 * PI / 4.0) * -0.75);
        assert!((y - expect).abs() < 1e-12);
        assert!((y + SQRT_2 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_direct_sum() {
        let n = 17;
        let occ: Vec<u8> = (1..n).map(|x| (x * 7 % 3 == 0) as u8).collect();
        let config = LatticeConfig::new(n, occ.clone()).unwrap();
        let bp = BoundaryParams::new(0.2, 0.6).unwrap();
        let centering = Profile1D::linear(n, &bp);
        let sample = project_field(&config, &centering, 4);
        for j in 1..=4 {
            let mut direct = 0.0;
            for x in 1..n {
                let u = x as f64 / n as f64;
                direct += SQRT_2 * (j as f64 * PI * u).sin() * (occ[x - 1] as f64 - centering.value(x));
            }
            direct /= (n as f64).sqrt();
            assert!((sample.y[j - 1] - direct).abs() < 1e-12);
            assert!(sample.y[j - 1].abs() <= SQRT_2 * (n as f64).sqrt());
        }
    }
}
