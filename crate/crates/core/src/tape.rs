//! Reverse-mode differentiation over jet-valued programs.
//!
//! A [`Tape`] records a fixed computation shape once; every training point
//! then replays it with fresh inputs: a forward sweep fills per-node jet
//! values, a backward sweep pushes coefficient adjoints and accumulates exact
//! parameter gradients. Because the loss shape never changes between points
//! or epochs, recording is paid once per run and each replay is two linear
//! array passes.
//!
//! Ingredients:
//! - `param(i)` / `mul_param` / `add_param` tie nodes to entries of the flat
//!   parameter vector; their pullbacks accumulate into the gradient.
//! - `slot_*` nodes read per-point inputs (x, t, load value) from a slot
//!   array, seeded either as differentiation variables or as constants.
//! - jet nodes (add, mul, tanh, ...) carry whole coefficient arrays, so one
//!   backward sweep yields the gradient of quantities that are themselves
//!   high-order input derivatives of the network output.

use crate::error::{Error, Result};
use crate::jet::{Jet, FACTORIAL, MAX_ORDER};

/// Handle to a recorded node.
#[derive(Clone, Copy, Debug)]
pub struct Var(u32);

#[derive(Clone, Copy, Debug)]
enum Node {
    /// Order-0 value read from the parameter vector.
    Param { idx: u32 },
    /// Differentiation variable seeded from a slot: coeffs [slot, 1, 0, ...].
    SlotVar { slot: u32, order: u8 },
    /// Constant seeded from a slot: coeffs [slot, 0, ...].
    SlotConst { slot: u32, order: u8 },
    /// Literal constant baked in at record time.
    Const { value: f64, order: u8 },
    Add { a: u32, b: u32 },
    Sub { a: u32, b: u32 },
    Mul { a: u32, b: u32 },
    Square { a: u32 },
    /// Multiplication by a literal constant.
    Scale { a: u32, c: f64 },
    /// Multiplication by parameter `p` (order-0 broadcast over coefficients).
    MulParam { a: u32, p: u32 },
    /// Addition of parameter `p` to the value coefficient (bias terms).
    AddParam { a: u32, p: u32 },
    Tanh { a: u32, aux: u32 },
    Exp { a: u32 },
    /// Order-0 result holding k! * coeffs[k] of the operand.
    Deriv { a: u32, k: u8 },
}

/// Recorded computation with reusable value/adjoint storage.
pub struct Tape {
    nodes: Vec<Node>,
    orders: Vec<u8>,
    vals: Vec<Jet>,
    adj: Vec<Jet>,
    /// h = 1 - tanh^2 series per tanh node, filled by the forward sweep.
    aux: Vec<Jet>,
    n_params: usize,
    n_slots: usize,
    root: Option<u32>,
}

impl Tape {
    pub fn new(n_params: usize, n_slots: usize) -> Self {
        Tape {
            nodes: Vec::new(),
            orders: Vec::new(),
            vals: Vec::new(),
            adj: Vec::new(),
            aux: Vec::new(),
            n_params,
            n_slots,
            root: None,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    fn push(&mut self, node: Node, order: u8) -> Var {
        let id = self.nodes.len() as u32;
        self.nodes.push(node);
        self.orders.push(order);
        self.vals.push(Jet::scalar(0.0));
        self.adj.push(Jet::scalar(0.0));
        Var(id)
    }

    fn order_of(&self, v: Var) -> u8 {
        self.orders[v.0 as usize]
    }

    fn check_match(&self, a: Var, b: Var) -> u8 {
        let (oa, ob) = (self.order_of(a), self.order_of(b));
        assert_eq!(oa, ob, "tape operand orders must match ({oa} vs {ob})");
        oa
    }

    pub fn param(&mut self, idx: usize) -> Var {
        assert!(idx < self.n_params, "parameter index out of range");
        self.push(Node::Param { idx: idx as u32 }, 0)
    }

    pub fn slot_var(&mut self, slot: usize, order: usize) -> Var {
        assert!(slot < self.n_slots, "slot index out of range");
        assert!(order >= 1 && order <= MAX_ORDER);
        self.push(
            Node::SlotVar {
                slot: slot as u32,
                order: order as u8,
            },
            order as u8,
        )
    }

    pub fn slot_const(&mut self, slot: usize, order: usize) -> Var {
        assert!(slot < self.n_slots, "slot index out of range");
        assert!(order <= MAX_ORDER);
        self.push(
            Node::SlotConst {
                slot: slot as u32,
                order: order as u8,
            },
            order as u8,
        )
    }

    pub fn constant(&mut self, value: f64, order: usize) -> Var {
        assert!(order <= MAX_ORDER);
        self.push(
            Node::Const {
                value,
                order: order as u8,
            },
            order as u8,
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let order = self.check_match(a, b);
        self.push(Node::Add { a: a.0, b: b.0 }, order)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let order = self.check_match(a, b);
        self.push(Node::Sub { a: a.0, b: b.0 }, order)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let order = self.check_match(a, b);
        self.push(Node::Mul { a: a.0, b: b.0 }, order)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let order = self.order_of(a);
        self.push(Node::Square { a: a.0 }, order)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let order = self.order_of(a);
        self.push(Node::Scale { a: a.0, c }, order)
    }

    pub fn mul_param(&mut self, a: Var, param_idx: usize) -> Var {
        assert!(param_idx < self.n_params, "parameter index out of range");
        let order = self.order_of(a);
        self.push(
            Node::MulParam {
                a: a.0,
                p: param_idx as u32,
            },
            order,
        )
    }

    pub fn add_param(&mut self, a: Var, param_idx: usize) -> Var {
        assert!(param_idx < self.n_params, "parameter index out of range");
        let order = self.order_of(a);
        self.push(
            Node::AddParam {
                a: a.0,
                p: param_idx as u32,
            },
            order,
        )
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let order = self.order_of(a);
        let aux = self.aux.len() as u32;
        self.aux.push(Jet::scalar(0.0));
        self.push(Node::Tanh { a: a.0, aux }, order)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let order = self.order_of(a);
        self.push(Node::Exp { a: a.0 }, order)
    }

    pub fn deriv(&mut self, a: Var, k: usize) -> Var {
        assert!(k <= self.order_of(a) as usize, "derivative order out of range");
        self.push(Node::Deriv { a: a.0, k: k as u8 }, 0)
    }

    pub fn set_root(&mut self, v: Var) {
        self.root = Some(v.0);
    }

    /// Forward sweep: fills every node value, returns the root's value
    /// coefficient.
    ///
    /// Panics if no root was set or the argument lengths disagree with the
    /// declared parameter/slot counts.
    pub fn forward(&mut self, params: &[f64], slots: &[f64]) -> f64 {
        assert_eq!(params.len(), self.n_params, "parameter vector length");
        assert_eq!(slots.len(), self.n_slots, "slot vector length");
        let root = self.root.expect("tape root not set") as usize;
        for i in 0..self.nodes.len() {
            let val = match self.nodes[i] {
                Node::Param { idx } => Jet::scalar(params[idx as usize]),
                Node::SlotVar { slot, order } => {
                    Jet::variable_unchecked(slots[slot as usize], order as usize)
                }
                Node::SlotConst { slot, order } => {
                    Jet::constant_unchecked(slots[slot as usize], order as usize)
                }
                Node::Const { value, order } => Jet::constant_unchecked(value, order as usize),
                Node::Add { a, b } => self.vals[a as usize].add(self.vals[b as usize]),
                Node::Sub { a, b } => self.vals[a as usize].sub(self.vals[b as usize]),
                Node::Mul { a, b } => self.vals[a as usize].mul(self.vals[b as usize]),
                Node::Square { a } => self.vals[a as usize].square(),
                Node::Scale { a, c } => self.vals[a as usize].scale(c),
                Node::MulParam { a, p } => self.vals[a as usize].scale(params[p as usize]),
                Node::AddParam { a, p } => self.vals[a as usize].add_value(params[p as usize]),
                Node::Tanh { a, aux } => {
                    let (u, h) = self.vals[a as usize].tanh_with_aux();
                    self.aux[aux as usize] = h;
                    u
                }
                Node::Exp { a } => self.vals[a as usize].exp(),
                Node::Deriv { a, k } => {
                    let src = &self.vals[a as usize];
                    Jet::scalar(FACTORIAL[k as usize] * src.coeffs()[k as usize])
                }
            };
            self.vals[i] = val;
        }
        self.vals[root].value()
    }

    /// Backward sweep over the values of the last `forward` call.
    ///
    /// Seeds the root adjoint with `seed` and accumulates `seed * d(root)/d(theta_i)`
    /// into `grad[i]`. Call once per point after its forward sweep; the seed
    /// carries the loss weight so weighted sums need no extra pass.
    pub fn backward(&mut self, params: &[f64], seed: f64, grad: &mut [f64]) {
        assert_eq!(params.len(), self.n_params, "parameter vector length");
        assert_eq!(grad.len(), self.n_params, "gradient vector length");
        let root = self.root.expect("tape root not set") as usize;
        for (a, &order) in self.adj.iter_mut().zip(&self.orders) {
            *a = Jet::constant_unchecked(0.0, order as usize);
        }
        {
            let r = &mut self.adj[root];
            *r = r.add_value(seed);
        }
        for i in (0..self.nodes.len()).rev() {
            let out_adj = self.adj[i];
            let m = self.orders[i] as usize;
            match self.nodes[i] {
                Node::Param { idx } => {
                    grad[idx as usize] += out_adj.coeffs()[0];
                }
                Node::SlotVar { .. } | Node::SlotConst { .. } | Node::Const { .. } => {}
                Node::Add { a, b } => {
                    let av = self.adj[a as usize].add(out_adj);
                    self.adj[a as usize] = av;
                    let bv = self.adj[b as usize].add(out_adj);
                    self.adj[b as usize] = bv;
                }
                Node::Sub { a, b } => {
                    let av = self.adj[a as usize].add(out_adj);
                    self.adj[a as usize] = av;
                    let bv = self.adj[b as usize].sub(out_adj);
                    self.adj[b as usize] = bv;
                }
                Node::Mul { a, b } => {
                    // c = a * b (truncated convolution):
                    // adj_a[i] += sum_{k>=i} adj_c[k] * b[k-i], same with a/b swapped.
                    let (va, vb) = (self.vals[a as usize], self.vals[b as usize]);
                    correlate_into(&mut self.adj, a as usize, &out_adj, &vb, m);
                    correlate_into(&mut self.adj, b as usize, &out_adj, &va, m);
                }
                Node::Square { a } => {
                    let va = self.vals[a as usize];
                    let doubled = out_adj.scale(2.0);
                    correlate_into(&mut self.adj, a as usize, &doubled, &va, m);
                }
                Node::Scale { a, c } => {
                    let av = self.adj[a as usize].add(out_adj.scale(c));
                    self.adj[a as usize] = av;
                }
                Node::MulParam { a, p } => {
                    let s = params[p as usize];
                    let av = self.adj[a as usize].add(out_adj.scale(s));
                    self.adj[a as usize] = av;
                    let va = self.vals[a as usize];
                    let mut acc = 0.0;
                    for k in 0..=m {
                        acc += out_adj.coeffs()[k] * va.coeffs()[k];
                    }
                    grad[p as usize] += acc;
                }
                Node::AddParam { a, p } => {
                    let av = self.adj[a as usize].add(out_adj);
                    self.adj[a as usize] = av;
                    grad[p as usize] += out_adj.coeffs()[0];
                }
                Node::Tanh { a, aux } => {
                    // du = h (*) ds with h = 1 - u^2, so the Jacobian entry
                    // d u_k / d s_j is h_{k-j}.
                    let h = self.aux[aux as usize];
                    correlate_into(&mut self.adj, a as usize, &out_adj, &h, m);
                }
                Node::Exp { a } => {
                    // dv = v (*) ds: Jacobian entry d v_k / d s_j is v_{k-j}.
                    let v = self.vals[i];
                    correlate_into(&mut self.adj, a as usize, &out_adj, &v, m);
                }
                Node::Deriv { a, k } => {
                    let upstream = FACTORIAL[k as usize] * out_adj.coeff(0);
                    self.adj[a as usize].add_coeff(k as usize, upstream);
                }
            }
        }
    }
}

/// adj[target][j] += sum_{k>=j} out[k] * kernel[k-j], truncated at `m`.
fn correlate_into(adj: &mut [Jet], target: usize, out: &Jet, kernel: &Jet, m: usize) {
    let result = &mut adj[target];
    for j in 0..=m {
        let mut acc = 0.0;
        for k in j..=m {
            acc += out.coeff(k) * kernel.coeff(k - j);
        }
        result.add_coeff(j, acc);
    }
}

/// Value and exact gradient of a scalar program over a flat parameter vector.
///
/// `build` records the program against parameter variables handed to it; the
/// root it returns is evaluated and differentiated in one forward/backward
/// pair. Returns a training error when the evaluated loss is non-finite.
pub fn loss_gradient<F>(build: F, params: &[f64]) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new(params.len(), 0);
    let vars: Vec<Var> = (0..params.len()).map(|i| tape.param(i)).collect();
    let root = build(&mut tape, &vars);
    tape.set_root(root);
    let value = tape.forward(params, &[]);
    if !value.is_finite() {
        return Err(Error::Training {
            epoch: 0,
            message: "loss evaluated to a non-finite value".into(),
        });
    }
    let mut grad = vec![0.0; params.len()];
    tape.backward(params, 1.0, &mut grad);
    Ok((value, grad))
}
