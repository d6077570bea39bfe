use std::io::{Read, Write};

use serde::Serialize;

use crate::{Error, Result};

/// Candidate solution on a shared uniform grid `t_j = j/N`, stored as
/// node values and node derivatives per component and interpolated by
/// piecewise cubic Hermite polynomials (C¹ by construction).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    intervals: usize,
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    interior: Vec<f64>,
}

pub const MIN_INTERVALS: usize = 8;

impl DiscreteState {
    /// Builds a state from node data; `values[i][j]` is `u_i(t_j)`.
    pub fn new(values: Vec<Vec<f64>>, derivs: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        if n == 0 || derivs.len() != n {
            return Err(Error::Precondition(
                "state needs at least one component and matching derivatives".into(),
            ));
        }
        let len = values[0].len();
        if len < MIN_INTERVALS + 1 {
            return Err(Error::Precondition(format!(
                "state needs at least {} nodes, got {len}",
                MIN_INTERVALS + 1
            )));
        }
        if values.iter().chain(&derivs).any(|c| c.len() != len) {
            return Err(Error::Precondition("ragged state arrays".into()));
        }
        let intervals = len - 1;
        let interior = (1..intervals).map(|j| node(j, intervals)).collect();
        Ok(DiscreteState {
            intervals,
            values,
            derivs,
            interior,
        })
    }

    pub fn zeros(components: usize, intervals: usize) -> Result<Self> {
        Self::from_fn(components, intervals, |_, _| (0.0, 0.0))
    }

    /// Samples `f(i, t) -> (u_i(t), u_i'(t))` at the nodes.
    pub fn from_fn(
        components: usize,
        intervals: usize,
        mut f: impl FnMut(usize, f64) -> (f64, f64),
    ) -> Result<Self> {
        let mut values = vec![vec![0.0; intervals + 1]; components];
        let mut derivs = vec![vec![0.0; intervals + 1]; components];
        for i in 0..components {
            for j in 0..=intervals {
                let (v, d) = f(i, node(j, intervals));
                values[i][j] = v;
                derivs[i][j] = d;
            }
        }
        Self::new(values, derivs)
    }

    pub fn components(&self) -> usize {
        self.values.len()
    }

    /// Number of grid intervals `N` (there are `N + 1` nodes).
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn node(&self, j: usize) -> f64 {
        node(j, self.intervals)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.intervals).map(|j| self.node(j)).collect()
    }

    /// Nodes strictly inside (0, 1): the panel breakpoints for integrals of
    /// the interpolant.
    pub fn interior_nodes(&self) -> &[f64] {
        &self.interior
    }

    pub fn node_values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn node_derivs(&self, i: usize) -> &[f64] {
        &self.derivs[i]
    }

    /// True when `t` coincides with a grid node (to 1e-12).
    pub fn has_node(&self, t: f64) -> bool {
        let x = t * self.intervals as f64;
        (x - x.round()).abs() <= 1e-12 * self.intervals as f64
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.intervals as f64;
        let x = (t * n).clamp(0.0, n);
        let j = (x.floor() as usize).min(self.intervals - 1);
        (j, x - j as f64)
    }

    pub fn value(&self, i: usize, t: f64) -> f64 {
        let (j, x) = self.locate(t);
        let h = 1.0 / self.intervals as f64;
        let (y, d) = (&self.values[i], &self.derivs[i]);
        let x2 = x * x;
        let x3 = x2 * x;
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        h00 * y[j] + h10 * h * d[j] + h01 * y[j + 1] + h11 * h * d[j + 1]
    }

    pub fn deriv(&self, i: usize, t: f64) -> f64 {
        let (j, x) = self.locate(t);
        let n = self.intervals as f64;
        let (y, d) = (&self.values[i], &self.derivs[i]);
        let x2 = x * x;
        let g00 = (6.0 * x2 - 6.0 * x) * n;
        let g10 = 3.0 * x2 - 4.0 * x + 1.0;
        let g01 = (-6.0 * x2 + 6.0 * x) * n;
        let g11 = 3.0 * x2 - 2.0 * x;
        g00 * y[j] + g10 * d[j] + g01 * y[j + 1] + g11 * d[j + 1]
    }

    /// Fills `u` and `du` with every component's value and derivative at `t`.
    pub fn eval_into(&self, t: f64, u: &mut [f64], du: &mut [f64]) {
        let (j, x) = self.locate(t);
        let n = self.intervals as f64;
        let h = 1.0 / n;
        let x2 = x * x;
        let x3 = x2 * x;
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = (x3 - 2.0 * x2 + x) * h;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = (x3 - x2) * h;
        let g00 = (6.0 * x2 - 6.0 * x) * n;
        let g10 = 3.0 * x2 - 4.0 * x + 1.0;
        let g11 = 3.0 * x2 - 2.0 * x;
        for i in 0..self.values.len() {
            let (y, d) = (&self.values[i], &self.derivs[i]);
            u[i] = h00 * y[j] + h10 * d[j] + h01 * y[j + 1] + h11 * d[j + 1];
            du[i] = g00 * (y[j] - y[j + 1]) + g10 * d[j] + g11 * d[j + 1];
        }
    }

    /// The `8N + 1` point monitoring grid on which sup norms are taken.
    pub fn monitoring_grid(&self) -> impl Iterator<Item = f64> {
        let m = 8 * self.intervals;
        (0..=m).map(move |k| k as f64 / m as f64)
    }

    /// Pointwise `self + alpha * other` on node data.
    pub fn axpy(&self, alpha: f64, other: &DiscreteState) -> Result<Self> {
        self.check_compatible(other)?;
        let comb = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + alpha * q).collect())
                .collect::<Vec<Vec<f64>>>()
        };
        Ok(DiscreteState {
            intervals: self.intervals,
            values: comb(&self.values, &other.values),
            derivs: comb(&self.derivs, &other.derivs),
            interior: self.interior.clone(),
        })
    }

    /// `(1 - alpha) * self + alpha * other`.
    pub fn blend(&self, alpha: f64, other: &DiscreteState) -> Result<Self> {
        self.check_compatible(other)?;
        let comb = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    x.iter()
                        .zip(y)
                        .map(|(p, q)| (1.0 - alpha) * p + alpha * q)
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>()
        };
        Ok(DiscreteState {
            intervals: self.intervals,
            values: comb(&self.values, &other.values),
            derivs: comb(&self.derivs, &other.derivs),
            interior: self.interior.clone(),
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let sc = |a: &Vec<Vec<f64>>| {
            a.iter()
                .map(|c| c.iter().map(|v| alpha * v).collect())
                .collect::<Vec<Vec<f64>>>()
        };
        DiscreteState {
            intervals: self.intervals,
            values: sc(&self.values),
            derivs: sc(&self.derivs),
            interior: self.interior.clone(),
        }
    }

    /// Adds a constant to the values of component `i`.
    pub fn shift_component(&mut self, i: usize, c: f64) {
        for v in &mut self.values[i] {
            *v += c;
        }
    }

    fn check_compatible(&self, other: &DiscreteState) -> Result<()> {
        if self.intervals != other.intervals || self.components() != other.components() {
            return Err(Error::Precondition(format!(
                "incompatible states: {}x{} vs {}x{}",
                self.components(),
                self.intervals,
                other.components(),
                other.intervals
            )));
        }
        Ok(())
    }

    /// Writes `t,u1,du1,...,un,dun` rows, one per node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for i in 1..=self.components() {
            header.push(format!("u{i}"));
            header.push(format!("du{i}"));
        }
        w.write_record(&header)?;
        for j in 0..=self.intervals {
            let mut row = vec![format!("{}", self.node(j))];
            for i in 0..self.components() {
                row.push(format!("{}", self.values[i][j]));
                row.push(format!("{}", self.derivs[i][j]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`DiscreteState::write_csv`]. Rows must be
    /// the uniform nodes in order.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let cols = r.headers()?.len();
        if cols < 3 || cols % 2 == 0 {
            return Err(Error::Precondition(format!(
                "state CSV needs t plus (u, du) column pairs, found {cols} columns"
            )));
        }
        let n = (cols - 1) / 2;
        let mut ts = Vec::new();
        let mut values = vec![Vec::new(); n];
        let mut derivs = vec![Vec::new(); n];
        for rec in r.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec[k].trim().parse::<f64>().map_err(|e| {
                    Error::Precondition(format!("bad number `{}` in state CSV: {e}", &rec[k]))
                })
            };
            ts.push(num(0)?);
            for i in 0..n {
                values[i].push(num(1 + 2 * i)?);
                derivs[i].push(num(2 + 2 * i)?);
            }
        }
        let state = Self::new(values, derivs)?;
        for (j, t) in ts.iter().enumerate() {
            if (t - state.node(j)).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "state CSV row {j} has t = {t}, expected uniform node {}",
                    state.node(j)
                )));
            }
        }
        Ok(state)
    }
}

fn node(j: usize, intervals: usize) -> f64 {
    j as f64 / intervals as f64
}

/// Sup norms of a state, taken over the monitoring grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateNorms {
    pub sup: Vec<f64>,
    pub dsup: Vec<f64>,
    pub c1: Vec<f64>,
    /// `max_i max(‖u_i‖∞, ‖u_i'‖∞)`
    pub norm: f64,
}

/// Product-space C¹ norm. Sup norms are maxima over the `8N + 1` monitoring
/// grid: exact at nodes, lower bounds of the interpolant's sup elsewhere.
pub fn c1_norm(u: &DiscreteState) -> StateNorms {
    let n = u.components();
    let mut sup = vec![0.0f64; n];
    let mut dsup = vec![0.0f64; n];
    let mut vals = vec![0.0; n];
    let mut ders = vec![0.0; n];
    for t in u.monitoring_grid() {
        u.eval_into(t, &mut vals, &mut ders);
        for i in 0..n {
            sup[i] = sup[i].max(vals[i].abs());
            dsup[i] = dsup[i].max(ders[i].abs());
        }
    }
    // node data are exact; make sure they are never missed by rounding
    for i in 0..n {
        for j in 0..=u.intervals() {
            sup[i] = sup[i].max(u.node_values(i)[j].abs());
            dsup[i] = dsup[i].max(u.node_derivs(i)[j].abs());
        }
    }
    let c1: Vec<f64> = sup.iter().zip(&dsup).map(|(a, b)| a.max(*b)).collect();
    let norm = c1.iter().copied().fold(0.0, f64::max);
    StateNorms {
        sup,
        dsup,
        c1,
        norm,
    }
}
