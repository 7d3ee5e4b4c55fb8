//! Elementwise primitives on stacked input-derivative jets.
//!
//! A jet of `b` rows and width `w` is stored as one row-major
//! `(channels·b) × w` array. With [`Order::Full`] the channels are, in
//! order, the value, `∂/∂z`, `∂/∂t` and `∂²/∂z²`; [`Order::Value`] carries the
//! value only. Linear maps act on all channels at once; only the value
//! channel receives biases.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    Full,
}

impl Order {
    pub fn channels(self) -> usize {
        match self {
            Order::Value => 1,
            Order::Full => 4,
        }
    }
}

pub const CH_V: usize = 0;
pub const CH_Z: usize = 1;
pub const CH_T: usize = 2;
pub const CH_ZZ: usize = 3;

/// `y = tanh(a)` propagated through the jet; `n` is rows·width per channel.
pub fn tanh_forward(order: Order, n: usize, a: &[f64], y: &mut [f64]) {
    match order {
        Order::Value => {
            for (yk, &ak) in y[..n].iter_mut().zip(&a[..n]) {
                *yk = ak.tanh();
            }
        }
        Order::Full => {
            let (av, rest) = a.split_at(n);
            let (az, rest) = rest.split_at(n);
            let (at, azz) = rest.split_at(n);
            let (yv, rest) = y.split_at_mut(n);
            let (yz, rest) = rest.split_at_mut(n);
            let (yt, yzz) = rest.split_at_mut(n);
            for k in 0..n {
                let v = av[k].tanh();
                let s = 1.0 - v * v;
                let dz = az[k];
                yv[k] = v;
                yz[k] = s * dz;
                yt[k] = s * at[k];
                yzz[k] = s * azz[k] - 2.0 * v * s * dz * dz;
            }
        }
    }
}

/// Adjoint of [`tanh_forward`]: writes `ā` given `ȳ`, the stored
/// pre-activation `a` and output `y`.
pub fn tanh_backward(order: Order, n: usize, a: &[f64], y: &[f64], y_bar: &[f64], a_bar: &mut [f64]) {
    match order {
        Order::Value => {
            for k in 0..n {
                let v = y[k];
                a_bar[k] = y_bar[k] * (1.0 - v * v);
            }
        }
        Order::Full => {
            let (az, rest) = a[n..].split_at(n);
            let (at, azz) = rest.split_at(n);
            let yv = &y[..n];
            let (gv, rest) = y_bar.split_at(n);
            let (gz, rest) = rest.split_at(n);
            let (gt, gzz) = rest.split_at(n);
            let (bv, rest) = a_bar.split_at_mut(n);
            let (bz, rest) = rest.split_at_mut(n);
            let (bt, bzz) = rest.split_at_mut(n);
            for k in 0..n {
                let v = yv[k];
                let s = 1.0 - v * v;
                let dz = az[k];
                let s_bar = gz[k] * dz + gt[k] * at[k] + gzz[k] * (azz[k] - 2.0 * v * dz * dz);
                let v_bar = gv[k] - 2.0 * v * s_bar - 2.0 * s * dz * dz * gzz[k];
                bv[k] = s * v_bar;
                bz[k] = s * (gz[k] - 4.0 * v * dz * gzz[k]);
                bt[k] = s * gt[k];
                bzz[k] = s * gzz[k];
            }
        }
    }
}

/// Gate `g = (1 − h)⊙u + h⊙v` through the jet.
pub fn gate_forward(order: Order, n: usize, h: &[f64], u: &[f64], v: &[f64], g: &mut [f64]) {
    match order {
        Order::Value => {
            for k in 0..n {
                g[k] = u[k] + h[k] * (v[k] - u[k]);
            }
        }
        Order::Full => {
            for k in 0..n {
                let (hv, hz, ht, hzz) = (h[k], h[n + k], h[2 * n + k], h[3 * n + k]);
                let dv = v[k] - u[k];
                let dz = v[n + k] - u[n + k];
                let dt = v[2 * n + k] - u[2 * n + k];
                let dzz = v[3 * n + k] - u[3 * n + k];
                g[k] = u[k] + hv * dv;
                g[n + k] = u[n + k] + hz * dv + hv * dz;
                g[2 * n + k] = u[2 * n + k] + ht * dv + hv * dt;
                g[3 * n + k] = u[3 * n + k] + hzz * dv + 2.0 * hz * dz + hv * dzz;
            }
        }
    }
}

/// Adjoint of [`gate_forward`]. Writes `h̄`; accumulates into `ū` and `v̄`,
/// which are shared by every gated layer.
#[allow(clippy::too_many_arguments)]
pub fn gate_backward(
    order: Order,
    n: usize,
    h: &[f64],
    u: &[f64],
    v: &[f64],
    g_bar: &[f64],
    h_bar: &mut [f64],
    u_bar: &mut [f64],
    v_bar: &mut [f64],
) {
    match order {
        Order::Value => {
            for k in 0..n {
                let gb = g_bar[k];
                h_bar[k] = gb * (v[k] - u[k]);
                let d_bar = gb * h[k];
                u_bar[k] += gb - d_bar;
                v_bar[k] += d_bar;
            }
        }
        Order::Full => {
            for k in 0..n {
                let (hv, hz, ht, hzz) = (h[k], h[n + k], h[2 * n + k], h[3 * n + k]);
                let dv = v[k] - u[k];
                let dz = v[n + k] - u[n + k];
                let dt = v[2 * n + k] - u[2 * n + k];
                let dzz = v[3 * n + k] - u[3 * n + k];
                let (gv, gz, gt, gzz) = (g_bar[k], g_bar[n + k], g_bar[2 * n + k], g_bar[3 * n + k]);

                h_bar[k] = gv * dv + gz * dz + gt * dt + gzz * dzz;
                h_bar[n + k] = gz * dv + 2.0 * gzz * dz;
                h_bar[2 * n + k] = gt * dv;
                h_bar[3 * n + k] = gzz * dv;

                let dbv = gv * hv + gz * hz + gt * ht + gzz * hzz;
                let dbz = gz * hv + 2.0 * gzz * hz;
                let dbt = gt * hv;
                let dbzz = gzz * hv;

                u_bar[k] += gv - dbv;
                u_bar[n + k] += gz - dbz;
                u_bar[2 * n + k] += gt - dbt;
                u_bar[3 * n + k] += gzz - dbzz;
                v_bar[k] += dbv;
                v_bar[n + k] += dbz;
                v_bar[2 * n + k] += dbt;
                v_bar[3 * n + k] += dbzz;
            }
        }
    }
}

/// Scalar gate, `(1 − h)·u + h·v` elementwise.
pub fn gated_layer(h: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
    assert!(h.len() == u.len() && u.len() == v.len(), "gate operands must have equal width");
    h.iter().zip(u).zip(v).map(|((&h, &u), &v)| u + h * (v - u)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a 1-row scalar jet for x(s) = x0 + x1 s + x2 s²/2 along a
    /// direction where z ≡ s and t ≡ s too, then checks the propagated
    /// channels against a finite-difference of the scalar function.
    fn jet_of(f: impl Fn(f64) -> f64, s: f64) -> (f64, f64, f64) {
        let h = 1e-4;
        let v = f(s);
        let d1 = (f(s + h) - f(s - h)) / (2.0 * h);
        let d2 = (f(s + h) - 2.0 * v + f(s - h)) / (h * h);
        (v, d1, d2)
    }

    #[test]
    fn tanh_jet_matches_finite_differences() {
        let x = |s: f64| 0.3 + 0.8 * s - 0.5 * s * s;
        let s0 = 0.2;
        let (xv, xz, xzz) = jet_of(x, s0);
        let a = [xv, xz, xz, xzz];
        let mut y = [0.0; 4];
        tanh_forward(Order::Full, 1, &a, &mut y);
        let (tv, tz, tzz) = jet_of(|s| x(s).tanh(), s0);
        assert!((y[CH_V] - tv).abs() < 1e-12);
        assert!((y[CH_Z] - tz).abs() < 1e-7);
        assert!((y[CH_T] - tz).abs() < 1e-7);
        assert!((y[CH_ZZ] - tzz).abs() < 1e-5);
    }

    #[test]
    fn tanh_adjoint_is_transpose_of_tangent() {
        // <ȳ, J δa> = <Jᵀ ȳ, δa> with J the linearisation of tanh_forward.
        let a = [0.4, -0.7, 0.2, 1.3];
        let y_bar = [0.9, -0.3, 0.5, 0.7];
        let mut y = [0.0; 4];
        tanh_forward(Order::Full, 1, &a, &mut y);
        let mut a_bar = [0.0; 4];
        tanh_backward(Order::Full, 1, &a, &y, &y_bar, &mut a_bar);
        let dir = [0.13, -0.4, 0.25, 0.6];
        let eps = 1e-6;
        let f = |s: f64| {
            let ap: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + s * d).collect();
            let mut yp = [0.0; 4];
            tanh_forward(Order::Full, 1, &ap, &mut yp);
            yp.iter().zip(&y_bar).map(|(p, q)| p * q).sum::<f64>()
        };
        let fd = (f(eps) - f(-eps)) / (2.0 * eps);
        let ad: f64 = a_bar.iter().zip(&dir).map(|(p, q)| p * q).sum();
        assert!((fd - ad).abs() < 1e-8, "{fd} vs {ad}");
    }

    #[test]
    fn gate_adjoint_is_transpose_of_tangent() {
        let h = [0.3, 0.1, -0.2, 0.4];
        let u = [-0.5, 0.2, 0.3, -0.1];
        let v = [0.7, -0.6, 0.05, 0.2];
        let g_bar = [0.4, 0.8, -0.3, 0.6];
        let mut h_bar = [0.0; 4];
        let mut u_bar = [0.0; 4];
        let mut v_bar = [0.0; 4];
        gate_backward(Order::Full, 1, &h, &u, &v, &g_bar, &mut h_bar, &mut u_bar, &mut v_bar);
        let (dh, du, dv) = ([0.2, -0.1, 0.3, 0.5], [0.1, 0.4, -0.2, 0.3], [-0.3, 0.2, 0.1, -0.4]);
        let f = |s: f64| {
            let hp: Vec<f64> = h.iter().zip(&dh).map(|(x, d)| x + s * d).collect();
            let up: Vec<f64> = u.iter().zip(&du).map(|(x, d)| x + s * d).collect();
            let vp: Vec<f64> = v.iter().zip(&dv).map(|(x, d)| x + s * d).collect();
            let mut g = [0.0; 4];
            gate_forward(Order::Full, 1, &hp, &up, &vp, &mut g);
            g.iter().zip(&g_bar).map(|(p, q)| p * q).sum::<f64>()
        };
        let eps = 1e-6;
        let fd = (f(eps) - f(-eps)) / (2.0 * eps);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let ad = dot(&h_bar, &dh) + dot(&u_bar, &du) + dot(&v_bar, &dv);
        assert!((fd - ad).abs() < 1e-9, "{fd} vs {ad}");
    }

    #[test]
    fn gated_layer_endpoints() {
        let u = [0.2, -0.4, 0.9];
        let v = [0.7, 0.1, -0.3];
        assert_eq!(gated_layer(&[0.3, 0.8, -0.2], &u, &u), u.to_vec());
        assert_eq!(gated_layer(&[0.0; 3], &u, &v), u.to_vec());
        for (g, v) in gated_layer(&[1.0; 3], &u, &v).iter().zip(&v) {
            assert!((g - v).abs() < 1e-15);
        }
    }
}
