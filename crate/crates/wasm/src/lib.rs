//! Browser bindings for the demo page in `www/`.
//!
//! Every method returns a flat `Float64Array`; the layout is given per method.

use std::sync::Arc;

use fracdn::{
    build_domain, make_sequence, reconstruct_diagonal, solve_dirichlet, BumpProfile, Coefficient,
    CoefficientFamily, FracParams, Gamma, GridDomain, Region, TestSequenceConfig,
};
use wasm_bindgen::prelude::*;

const HALF_WIDTH: f64 = 4.0;
const SPACING: f64 = 1.0 / 128.0;
const X0: f64 = 2.5;
const R0: f64 = 0.5;
const N_LIST: [u32; 4] = [1, 2, 4, 8];

fn coefficient(name: &str) -> fracdn::Result<Coefficient> {
    let family = match name {
        "constant" => CoefficientFamily::Constant { value: 2.0 },
        "separable" => CoefficientFamily::Separable {
            gamma: Gamma {
                base: 1.5,
                amplitude: 0.5,
                center: vec![X0],
                width: 1.0,
            },
        },
        _ => CoefficientFamily::Sinusoidal {
            base: 2.0,
            amplitude: 1.0,
            frequency: 1.0,
        },
    };
    Coefficient::closed_form(family, None)
}

struct Model {
    domain: Arc<GridDomain>,
    params: FracParams,
}

impl Model {
    fn new(s: f64, p: f64) -> fracdn::Result<Self> {
        let domain = build_domain(
            1,
            HALF_WIDTH,
            SPACING,
            Region::interval(-1.0, 1.0),
            Region::interval(2.0, 3.0),
        )?;
        Ok(Self {
            domain: Arc::new(domain),
            params: FracParams::new(s, p)?,
        })
    }

    fn sequence(&self) -> TestSequenceConfig {
        TestSequenceConfig {
            x0: vec![X0],
            n_list: N_LIST.to_vec(),
            s: self.params.s,
            p: self.params.p,
            r0: R0,
        }
    }

    /// `[x, Φ_N(x)]` over the nodes of W.
    fn bump(&self, n: u32) -> fracdn::Result<Vec<f64>> {
        let k = N_LIST.iter().position(|&m| m == n).unwrap_or(0);
        let phi = make_sequence(&self.sequence(), &self.domain, BumpProfile::Mollifier)?.swap_remove(k);
        Ok(self
            .domain
            .w_set()
            .iter()
            .flat_map(|&i| [self.domain.coord(i)[0], phi.values()[i]])
            .collect())
    }

    /// `[x, u(x)]` over `[-1.5, 3.5]` for the data `Φ_N`.
    fn solve(&self, n: u32, coef: &str) -> fracdn::Result<Vec<f64>> {
        let k = N_LIST.iter().position(|&m| m == n).unwrap_or(0);
        let phi = make_sequence(&self.sequence(), &self.domain, BumpProfile::Mollifier)?.swap_remove(k);
        let r = solve_dirichlet(&coefficient(coef)?, &phi, &self.params)?;
        Ok((0..self.domain.len())
            .map(|i| (self.domain.coord(i)[0], r.u.values()[i]))
            .filter(|(x, _)| (-1.5..=3.5).contains(x))
            .flat_map(|(x, u)| [x, u])
            .collect())
    }

    /// `[target, limit, N, pairing, energy, correction, ...]`.
    fn reconstruct(&self, coef: &str) -> fracdn::Result<Vec<f64>> {
        let rec = reconstruct_diagonal(
            &coefficient(coef)?,
            &self.domain,
            BumpProfile::Mollifier,
            &self.sequence(),
            &self.params,
        )?;
        let mut out = vec![rec.target, rec.limit().unwrap_or(f64::NAN)];
        for row in &rec.rows {
            out.extend([row.n as f64, row.pairing, row.energy, row.correction]);
        }
        Ok(out)
    }
}

fn js_err(e: fracdn::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    model: Model,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(s: f64, p: f64) -> Result<Demo, JsValue> {
        Model::new(s, p).map(|model| Demo { model }).map_err(js_err)
    }

    pub fn bump(&self, n: u32) -> Result<Vec<f64>, JsValue> {
        self.model.bump(n).map_err(js_err)
    }

    pub fn solve(&self, n: u32, coefficient: &str) -> Result<Vec<f64>, JsValue> {
        self.model.solve(n, coefficient).map_err(js_err)
    }

    pub fn reconstruct(&self, coefficient: &str) -> Result<Vec<f64>, JsValue> {
        self.model.reconstruct(coefficient).map_err(js_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts() {
        let m = Model::new(0.5, 2.0).unwrap();
        let b = m.bump(4).unwrap();
        assert_eq!(b.len(), 2 * m.domain.w_set().len());
        let peak = b.chunks(2).map(|c| c[1]).fold(0.0, f64::max);
        assert!(peak > 0.0);

        let u = m.solve(1, "sinusoidal").unwrap();
        assert!(u.chunks(2).all(|c| (-1.5..=3.5).contains(&c[0])));

        let r = m.reconstruct("constant").unwrap();
        assert_eq!(r.len(), 2 + 4 * N_LIST.len());
        assert!((r[1] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn bad_exponent_is_rejected() {
        assert!(Model::new(0.5, 1.0).is_err());
    }
}
