//! Reverse-mode differentiation over scalar computation graphs.
//!
//! A [`Graph`] is an arena of nodes. Building a node only records the
//! operation; [`Graph::forward`] evaluates everything the root depends on in
//! topological order and [`Graph::backward`] propagates adjoints back to the
//! leaves. Leaf values can be changed with [`Graph::set_value`] and the graph
//! re-evaluated, so a graph built once can be reused across training steps.
//!
//! `max` and `min` route the whole adjoint to the attaining argument, the
//! lowest-index one on exact ties.
//!
//! ```
//! use semalloc_core::grad::Graph;
//!
//! let mut g = Graph::new();
//! let x = g.parameter(2.0);
//! let y = g.parameter(3.0);
//! let xy = g.mul(x, y);
//! let m = g.max(&[x, y]);
//! let f = g.add(&[xy, m]);
//! assert_eq!(g.forward(f).unwrap(), 9.0);
//! let grads = g.backward(f).unwrap();
//! assert_eq!(grads.get(x), 3.0);
//! assert_eq!(grads.get(y), 3.0);
//! ```

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Constant,
    Parameter,
    Add(Vec<NodeId>),
    Mul([NodeId; 2]),
    Exp(NodeId),
    Max(Vec<NodeId>),
    Min(Vec<NodeId>),
    /// Component `index` of `softmax(inputs)`.
    SoftmaxComponent {
        inputs: Vec<NodeId>,
        index: usize,
    },
    /// Reserved with [`Graph::placeholder`] and not yet defined.
    Placeholder,
}

/// Gradients of one scalar root with respect to every node.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> f64 {
        self.adjoints[id.0]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    ops: Vec<Op>,
    values: Vec<f64>,
    /// Cached evaluation order for the last root.
    order: Option<(NodeId, Vec<usize>)>,
    /// Root of the last forward pass, cleared by any mutation.
    evaluated: Option<NodeId>,
    backward_visits: usize,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op, value: f64) -> NodeId {
        self.ops.push(op);
        self.values.push(value);
        self.order = None;
        self.evaluated = None;
        NodeId(self.ops.len() - 1)
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn parameter(&mut self, value: f64) -> NodeId {
        self.push(Op::Parameter, value)
    }

    pub fn add(&mut self, terms: &[NodeId]) -> NodeId {
        assert!(!terms.is_empty(), "add needs at least one term");
        self.push(Op::Add(terms.to_vec()), f64::NAN)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul([a, b]), f64::NAN)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Exp(a), f64::NAN)
    }

    pub fn max(&mut self, args: &[NodeId]) -> NodeId {
        assert!(!args.is_empty(), "max needs at least one argument");
        self.push(Op::Max(args.to_vec()), f64::NAN)
    }

    pub fn min(&mut self, args: &[NodeId]) -> NodeId {
        assert!(!args.is_empty(), "min needs at least one argument");
        self.push(Op::Min(args.to_vec()), f64::NAN)
    }

    pub fn softmax_component(&mut self, inputs: &[NodeId], index: usize) -> NodeId {
        assert!(index < inputs.len(), "softmax index out of range");
        self.push(
            Op::SoftmaxComponent {
                inputs: inputs.to_vec(),
                index,
            },
            f64::NAN,
        )
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let m = self.constant(-1.0);
        self.mul(m, a)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.neg(b);
        self.add(&[a, nb])
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let c = self.constant(k);
        self.mul(c, a)
    }

    /// Reserves a node to be defined later with [`Graph::define`], for
    /// graphs whose wiring is not known up front.
    pub fn placeholder(&mut self) -> NodeId {
        self.push(Op::Placeholder, f64::NAN)
    }

    pub fn define(&mut self, id: NodeId, op: Op) -> Result<()> {
        self.check_id(id)?;
        if self.ops[id.0] != Op::Placeholder {
            return Err(Error::InvalidGraph(format!("node {} is already defined", id.0)));
        }
        if matches!(op, Op::Constant | Op::Parameter | Op::Placeholder) {
            return Err(Error::InvalidGraph("define takes an interior operation".into()));
        }
        for &input in inputs_of(&op) {
            self.check_id(input)?;
        }
        self.ops[id.0] = op;
        self.order = None;
        self.evaluated = None;
        Ok(())
    }

    fn check_id(&self, id: NodeId) -> Result<()> {
        if id.0 < self.ops.len() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(format!("unknown node {}", id.0)))
        }
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.ops[id.0]
    }

    /// Value from the last forward pass, or the leaf value.
    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id.0]
    }

    /// Updates a constant or parameter. Invalidates the last forward pass.
    pub fn set_value(&mut self, id: NodeId, value: f64) {
        assert!(
            matches!(self.ops[id.0], Op::Constant | Op::Parameter),
            "set_value on an interior node"
        );
        self.values[id.0] = value;
        self.evaluated = None;
    }

    /// Number of nodes visited by the most recent backward pass.
    pub fn backward_visits(&self) -> usize {
        self.backward_visits
    }

    fn topo_order(&mut self, root: NodeId) -> Result<()> {
        if matches!(&self.order, Some((r, _)) if *r == root) {
            return Ok(());
        }
        self.check_id(root)?;
        const NEW: u8 = 0;
        const OPEN: u8 = 1;
        const DONE: u8 = 2;
        let mut state = vec![NEW; self.ops.len()];
        let mut order = Vec::new();
        // (node, next input position)
        let mut stack = vec![(root.0, 0usize)];
        state[root.0] = OPEN;
        while let Some(top) = stack.last_mut() {
            let (node, pos) = *top;
            let op = &self.ops[node];
            if *op == Op::Placeholder {
                return Err(Error::InvalidGraph(format!("node {node} was never defined")));
            }
            let inputs = inputs_of(op);
            if pos < inputs.len() {
                top.1 += 1;
                let next = inputs[pos].0;
                match state[next] {
                    NEW => {
                        state[next] = OPEN;
                        stack.push((next, 0));
                    }
                    OPEN => {
                        return Err(Error::InvalidGraph(format!("cycle through node {next}")));
                    }
                    _ => {}
                }
            } else {
                state[node] = DONE;
                order.push(node);
                stack.pop();
            }
        }
        self.order = Some((root, order));
        Ok(())
    }

    /// Evaluates `root` and everything it depends on.
    pub fn forward(&mut self, root: NodeId) -> Result<f64> {
        self.topo_order(root)?;
        let (_, order) = self.order.as_ref().expect("order computed");
        for &n in order {
            let v = match &self.ops[n] {
                Op::Constant | Op::Parameter => continue,
                Op::Add(xs) => xs.iter().map(|x| self.values[x.0]).sum(),
                Op::Mul([a, b]) => self.values[a.0] * self.values[b.0],
                Op::Exp(a) => self.values[a.0].exp(),
                Op::Max(xs) => self.values[xs[self.attaining(xs, true)].0],
                Op::Min(xs) => self.values[xs[self.attaining(xs, false)].0],
                Op::SoftmaxComponent { inputs, index } => self.softmax(inputs)[*index],
                Op::Placeholder => unreachable!("rejected by topo_order"),
            };
            self.values[n] = v;
        }
        self.evaluated = Some(root);
        Ok(self.values[root.0])
    }

    /// Position of the first maximal (or minimal) argument.
    fn attaining(&self, xs: &[NodeId], max: bool) -> usize {
        let mut best = 0;
        for (i, x) in xs.iter().enumerate().skip(1) {
            let (v, b) = (self.values[x.0], self.values[xs[best].0]);
            if (max && v > b) || (!max && v < b) {
                best = i;
            }
        }
        best
    }

    fn softmax(&self, inputs: &[NodeId]) -> Vec<f64> {
        let m = inputs
            .iter()
            .map(|x| self.values[x.0])
            .fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = inputs.iter().map(|x| (self.values[x.0] - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    /// Adjoints of `root` with respect to every node. Requires a forward pass
    /// from the same root since the last mutation.
    pub fn backward(&mut self, root: NodeId) -> Result<Gradients> {
        if self.evaluated != Some(root) {
            return Err(Error::InvalidState(
                "backward called without a current forward pass from this root".into(),
            ));
        }
        let (_, order) = self.order.as_ref().expect("forward computed the order");
        let mut adj = vec![0.0; self.ops.len()];
        adj[root.0] = 1.0;
        let mut visits = 0;
        for &n in order.iter().rev() {
            visits += 1;
            let g = adj[n];
            if g == 0.0 {
                continue;
            }
            match &self.ops[n] {
                Op::Constant | Op::Parameter | Op::Placeholder => {}
                Op::Add(xs) => {
                    for x in xs {
                        adj[x.0] += g;
                    }
                }
                Op::Mul([a, b]) => {
                    adj[a.0] += g * self.values[b.0];
                    adj[b.0] += g * self.values[a.0];
                }
                Op::Exp(a) => adj[a.0] += g * self.values[n],
                Op::Max(xs) => adj[xs[self.attaining(xs, true)].0] += g,
                Op::Min(xs) => adj[xs[self.attaining(xs, false)].0] += g,
                Op::SoftmaxComponent { inputs, index } => {
                    let s = self.softmax(inputs);
                    for (j, x) in inputs.iter().enumerate() {
                        let delta = if j == *index { 1.0 } else { 0.0 };
                        adj[x.0] += g * s[*index] * (delta - s[j]);
                    }
                }
            }
        }
        self.backward_visits = visits;
        Ok(Gradients { adjoints: adj })
    }

    /// Smallest gap between the selected and runner-up argument over every
    /// `max`/`min` node of the last forward pass. `f64::INFINITY` when there
    /// are no such nodes.
    pub fn kink_margin(&self) -> f64 {
        let Some((_, order)) = &self.order else {
            return f64::INFINITY;
        };
        let mut margin = f64::INFINITY;
        for &n in order {
            if let Op::Max(xs) | Op::Min(xs) = &self.ops[n] {
                if xs.len() < 2 {
                    continue;
                }
                let chosen = self.values[n];
                let mut pick_skipped = false;
                for x in xs {
                    let v = self.values[x.0];
                    if v == chosen && !pick_skipped {
                        pick_skipped = true;
                        continue;
                    }
                    margin = margin.min((v - chosen).abs());
                }
            }
        }
        margin
    }
}

fn inputs_of(op: &Op) -> &[NodeId] {
    match op {
        Op::Constant | Op::Parameter | Op::Placeholder => &[],
        Op::Add(xs) | Op::Max(xs) | Op::Min(xs) => xs,
        Op::SoftmaxComponent { inputs, .. } => inputs,
        Op::Mul(ab) => ab,
        Op::Exp(a) => std::slice::from_ref(a),
    }
}

/// Largest relative error between analytic gradients and central differences
/// over `params`, `|analytic - numeric| / (|analytic| + 1e-12)`.
///
/// Parameters must sit further than `h` from any `max`/`min` kink. Parameter
/// values are restored before returning.
pub fn check_gradients(graph: &mut Graph, root: NodeId, params: &[NodeId], h: f64) -> Result<f64> {
    graph.forward(root)?;
    let grads = graph.backward(root)?;
    let mut worst: f64 = 0.0;
    for &p in params {
        let x = graph.value(p);
        graph.set_value(p, x + h);
        let up = graph.forward(root)?;
        graph.set_value(p, x - h);
        let down = graph.forward(root)?;
        graph.set_value(p, x);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.get(p);
        worst = worst.max((analytic - numeric).abs() / (analytic.abs() + 1e-12));
    }
    graph.forward(root)?;
    Ok(worst)
}
