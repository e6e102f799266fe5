//! Rotationally symmetric maps flowed on a low-resolution latitude-longitude
//! grid of S² (extrinsic, projected) against the equivariant solver.

use std::f64::consts::PI;

use hmflow_core::flow::{run, FlowConfig};
use hmflow_core::Execution;

struct LatLong {
    nt: usize,
    np: usize,
    f: Vec<[f64; 3]>,
}

impl LatLong {
    fn ht(&self) -> f64 {
        PI / self.nt as f64
    }

    fn hp(&self) -> f64 {
        2.0 * PI / self.np as f64
    }

    fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.ht()
    }

    fn new(nt: usize, np: usize, profile: impl Fn(f64) -> f64) -> Self {
        let mut s = Self { nt, np, f: vec![] };
        for i in 0..nt {
            let psi = profile(s.theta(i));
            for k in 0..np {
                let p = k as f64 * s.hp();
                s.f.push([psi.sin() * p.cos(), psi.sin() * p.sin(), psi.cos()]);
            }
        }
        s
    }

    /// Value at latitude index `i` (may step one row past a pole) and longitude `k`.
    fn at(&self, i: isize, k: isize) -> [f64; 3] {
        let np = self.np as isize;
        let (i, k) = if i < 0 {
            (-1 - i, k + np / 2)
        } else if i >= self.nt as isize {
            (2 * self.nt as isize - 1 - i, k + np / 2)
        } else {
            (i, k)
        };
        self.f[i as usize * self.np + k.rem_euclid(np) as usize]
    }

    fn derivatives(&self, i: usize, k: usize) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (ii, kk) = (i as isize, k as isize);
        let c = self.at(ii, kk);
        let (n, s) = (self.at(ii - 1, kk), self.at(ii + 1, kk));
        let (w, e) = (self.at(ii, kk - 1), self.at(ii, kk + 1));
        let (ht, hp) = (self.ht(), self.hp());
        let th = self.theta(i);
        let mut ft = [0.0; 3];
        let mut fp = [0.0; 3];
        let mut lap = [0.0; 3];
        for a in 0..3 {
            ft[a] = (s[a] - n[a]) / (2.0 * ht);
            fp[a] = (e[a] - w[a]) / (2.0 * hp);
            lap[a] = (s[a] - 2.0 * c[a] + n[a]) / (ht * ht)
                + th.cos() / th.sin() * ft[a]
                + (e[a] - 2.0 * c[a] + w[a]) / (hp * hp * th.sin().powi(2));
        }
        (ft, fp, lap)
    }

    fn energy(&self) -> f64 {
        let mut e = 0.0;
        for i in 0..self.nt {
            let th = self.theta(i);
            for k in 0..self.np {
                let (ft, fp, _) = self.derivatives(i, k);
                let d2: f64 = (0..3)
                    .map(|a| ft[a] * ft[a] + fp[a] * fp[a] / th.sin().powi(2))
                    .sum();
                e += d2 * th.sin();
            }
        }
        e * self.ht() * self.hp()
    }

    fn flow(&mut self, t_end: f64) {
        let eff = self.theta(0).sin() * self.hp();
        let steps = (t_end / (0.2 * eff * eff)).ceil() as usize;
        let dt = t_end / steps as f64;
        for _ in 0..steps {
            let mut next = self.f.clone();
            for i in 0..self.nt {
                for k in 0..self.np {
                    let (_, _, lap) = self.derivatives(i, k);
                    let p = self.f[i * self.np + k];
                    let dot: f64 = (0..3).map(|a| lap[a] * p[a]).sum();
                    let q = &mut next[i * self.np + k];
                    for a in 0..3 {
                        q[a] = p[a] + dt * (lap[a] - dot * p[a]);
                    }
                    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                    q.iter_mut().for_each(|v| *v /= norm);
                }
            }
            self.f = next;
        }
    }
}

fn equivariant_energy(scenario: &str, j: usize, t_end: f64) -> (f64, f64) {
    let c: FlowConfig = serde_json::from_str(&format!(
        r#"{{"domain":{{"kind":"round_sphere","dim":2,"intervals":{j}}},
            "target":{{"kind":"round_sphere","dim":2,"radius":1.0}},
            "initial_map":{scenario},
            "flow":{{"t_max":{t_end},"monitor_stride":1000000}}}}"#
    ))
    .unwrap();
    let out = run(&c, Execution::Serial).unwrap();
    let first = out.series.rows.first().unwrap().energy_phi;
    let last = out.series.rows.last().unwrap().energy_phi;
    (first, last)
}

fn compare(scenario: &str, profile: impl Fn(f64) -> f64) {
    let nt = 24;
    let mut ll = LatLong::new(nt, 2 * nt, profile);
    let e0 = ll.energy();
    ll.flow(1.0);
    let e1 = ll.energy();
    let (q0, q1) = equivariant_energy(scenario, nt, 1.0);
    assert!((e0 - q0).abs() <= 0.02 * q0, "t = 0: {e0} vs {q0}");
    assert!((e1 - q1).abs() <= 0.02 * q1, "t = 1: {e1} vs {q1}");
}

#[test]
fn bump_energy_agrees_with_lat_long_grid() {
    compare(r#"{"scenario":"degree0_bump","amplitude":0.8}"#, |r| {
        0.8 * r.sin()
    });
}

#[test]
fn perturbed_identity_energy_agrees_with_lat_long_grid() {
    compare(
        r#"{"scenario":"degree1_perturbed","epsilon":0.1,"mode":2}"#,
        |r| r + 0.1 * (2.0 * r).sin(),
    );
}
