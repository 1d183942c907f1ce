//! Truncated univariate Taylor arithmetic ("jets").
//!
//! A `Jet` carries the Taylor coefficients of one scalar quantity with respect
//! to a single input: `coeffs[k] = f^(k)(a) / k!`. Pushing jets through the
//! network arithmetic yields exact input derivatives of the output, up to
//! order 4 in x and order 2 in t, which is every derivative the beam residual
//! and its boundary/initial conditions need.
//!
//! Orders of operands must match. The inherent methods treat a mismatch as a
//! programmer error and panic; the [`jet_arith`] entry point validates and
//! returns an error instead.

use crate::error::{Error, Result};

/// Highest supported Taylor order.
pub const MAX_ORDER: usize = 4;

const MAX_COEFFS: usize = MAX_ORDER + 1;

/// k! for k = 0..=4.
pub(crate) const FACTORIAL: [f64; MAX_COEFFS] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// Truncated Taylor expansion of a scalar quantity at a point.
///
/// Coefficients beyond `order` are kept at zero and never read.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    coeffs: [f64; MAX_COEFFS],
}

impl Jet {
    /// Order-0 jet holding a bare value. Used where plain scalars and jets
    /// travel through the same code paths (the reverse-mode tape).
    pub(crate) fn scalar(value: f64) -> Self {
        Jet {
            order: 0,
            coeffs: [value, 0.0, 0.0, 0.0, 0.0],
        }
    }

    /// Seed variable without the public order check; `order <= MAX_ORDER`.
    pub(crate) fn variable_unchecked(value: f64, order: usize) -> Self {
        debug_assert!(order <= MAX_ORDER);
        let mut coeffs = [0.0; MAX_COEFFS];
        coeffs[0] = value;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Jet { order, coeffs }
    }

    /// Constant without the public order check; `order <= MAX_ORDER`.
    pub(crate) fn constant_unchecked(value: f64, order: usize) -> Self {
        debug_assert!(order <= MAX_ORDER);
        let mut coeffs = [0.0; MAX_COEFFS];
        coeffs[0] = value;
        Jet { order, coeffs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The value coefficient f(a).
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficients `[f(a), f'(a), f''(a)/2!, ...]`, one per order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..=self.order]
    }

    fn same_order(&self, other: &Jet) -> usize {
        assert_eq!(
            self.order, other.order,
            "jet operand orders must match ({} vs {})",
            self.order, other.order
        );
        self.order
    }

    pub fn add(self, other: Jet) -> Jet {
        let order = self.same_order(&other);
        let mut out = self;
        for k in 0..=order {
            out.coeffs[k] += other.coeffs[k];
        }
        out
    }

    pub fn sub(self, other: Jet) -> Jet {
        let order = self.same_order(&other);
        let mut out = self;
        for k in 0..=order {
            out.coeffs[k] -= other.coeffs[k];
        }
        out
    }

    /// Leibniz convolution truncated at the shared order.
    pub fn mul(self, other: Jet) -> Jet {
        let order = self.same_order(&other);
        let mut coeffs = [0.0; MAX_COEFFS];
        for k in 0..=order {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += self.coeffs[i] * other.coeffs[k - i];
            }
            coeffs[k] = acc;
        }
        Jet { order, coeffs }
    }

    /// Multiplication by a plain constant.
    pub fn scale(self, c: f64) -> Jet {
        let mut out = self;
        for k in 0..=self.order {
            out.coeffs[k] *= c;
        }
        out
    }

    /// Addition of a plain constant (value coefficient only).
    pub fn add_value(self, c: f64) -> Jet {
        let mut out = self;
        out.coeffs[0] += c;
        out
    }

    pub fn square(self) -> Jet {
        self.mul(self)
    }

    /// tanh propagated degree by degree through u' = (1 - u^2) s'.
    ///
    /// With h = 1 - u^2 built incrementally:
    ///   u_k = (1/k) * sum_{j=1..k} j * s_j * h_{k-j}
    ///   h_k = -sum_{i=0..k} u_i * u_{k-i}        (k >= 1)
    pub fn tanh(self) -> Jet {
        let order = self.order;
        let s = &self.coeffs;
        let mut u = [0.0; MAX_COEFFS];
        let mut h = [0.0; MAX_COEFFS];
        u[0] = s[0].tanh();
        h[0] = 1.0 - u[0] * u[0];
        for k in 1..=order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * s[j] * h[k - j];
            }
            u[k] = acc / (k as f64);
            let mut hh = 0.0;
            for i in 0..=k {
                hh += u[i] * u[k - i];
            }
            h[k] = -hh;
        }
        Jet { order, coeffs: u }
    }

    /// exp propagated through v' = v s':  v_k = (1/k) * sum_{j=1..k} j s_j v_{k-j}.
    pub fn exp(self) -> Jet {
        let order = self.order;
        let s = &self.coeffs;
        let mut v = [0.0; MAX_COEFFS];
        v[0] = s[0].exp();
        for k in 1..=order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * s[j] * v[k - j];
            }
            v[k] = acc / (k as f64);
        }
        Jet { order, coeffs: v }
    }

    /// Raw coefficient access for the reverse-mode tape.
    pub(crate) fn coeff(&self, k: usize) -> f64 {
        self.coeffs[k]
    }

    pub(crate) fn add_coeff(&mut self, k: usize, v: f64) {
        debug_assert!(k <= self.order);
        self.coeffs[k] += v;
    }

    /// The h = 1 - tanh^2 coefficient series, needed by the reverse sweep.
    pub(crate) fn tanh_with_aux(self) -> (Jet, Jet) {
        let order = self.order;
        let s = &self.coeffs;
        let mut u = [0.0; MAX_COEFFS];
        let mut h = [0.0; MAX_COEFFS];
        u[0] = s[0].tanh();
        h[0] = 1.0 - u[0] * u[0];
        for k in 1..=order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * s[j] * h[k - j];
            }
            u[k] = acc / (k as f64);
            let mut hh = 0.0;
            for i in 0..=k {
                hh += u[i] * u[k - i];
            }
            h[k] = -hh;
        }
        (Jet { order, coeffs: u }, Jet { order, coeffs: h })
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unsupported jet order {order}; expected 1..={MAX_ORDER}"
        )))
    }
}

/// The differentiation variable seated at `value`: coefficients [value, 1, 0, ...].
pub fn jet_variable(value: f64, order: usize) -> Result<Jet> {
    check_order(order)?;
    Ok(Jet::variable_unchecked(value, order))
}

/// A constant: all derivatives zero.
pub fn jet_constant(value: f64, order: usize) -> Result<Jet> {
    check_order(order)?;
    Ok(Jet::constant_unchecked(value, order))
}

/// The k-th derivative stored in a jet: k! * coeffs[k].
pub fn extract_derivative(j: &Jet, k: usize) -> Result<f64> {
    if k > j.order {
        return Err(Error::Usage(format!(
            "derivative order {k} out of range for a jet of order {}",
            j.order
        )));
    }
    Ok(FACTORIAL[k] * j.coeffs[k])
}

/// Arithmetic kinds accepted by [`jet_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithKind {
    Add,
    Sub,
    Mul,
    /// Multiplication by a constant; the factor is `b`'s value coefficient.
    Scale,
    Tanh,
    Exp,
    Square,
}

/// Validated dispatch over the supported operations.
///
/// Binary kinds require `b`; unary kinds require `b` to be absent. Operand
/// orders must match for add/sub/mul.
pub fn jet_arith(kind: ArithKind, a: Jet, b: Option<Jet>) -> Result<Jet> {
    use ArithKind::*;
    match kind {
        Add | Sub | Mul | Scale => {
            let b = b.ok_or_else(|| Error::Usage(format!("{kind:?} requires two operands")))?;
            if matches!(kind, Add | Sub | Mul) && a.order != b.order {
                return Err(Error::Usage(format!(
                    "jet order mismatch: {} vs {}",
                    a.order, b.order
                )));
            }
            Ok(match kind {
                Add => a.add(b),
                Sub => a.sub(b),
                Mul => a.mul(b),
                Scale => a.scale(b.value()),
                _ => unreachable!(),
            })
        }
        Tanh | Exp | Square => {
            if b.is_some() {
                return Err(Error::Usage(format!("{kind:?} takes a single operand")));
            }
            Ok(match kind {
                Tanh => a.tanh(),
                Exp => a.exp(),
                Square => a.square(),
                _ => unreachable!(),
            })
        }
    }
}
