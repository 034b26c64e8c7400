//! Network descriptions for bounded linear-threshold rate dynamics
//!
//! ```text
//! tau_i dx_i/dt = -x_i + [ (W x + u)_i ]_0^{m_i}
//! ```
//!
//! [`Network`] is the general form. The structured families used by the
//! closed-form criteria ([`EIPairParams`], [`SingleInhibitoryNetwork`],
//! [`EIPairNetwork`]) keep their own parameterisation and flatten into a
//! [`Network`] when an exhaustive check or a simulation is needed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A linear-threshold network `(W, u, m, tau)`.
///
/// Fields are public and unchecked; [`validate_network`] reports every
/// violated modelling assumption, and operations that need a well-formed
/// network call [`Network::check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct Network {
    pub w: DMatrix<f64>,
    pub u: DVector<f64>,
    pub m: DVector<f64>,
    pub tau: DVector<f64>,
}

impl Network {
    pub fn new(w: DMatrix<f64>, u: DVector<f64>, m: DVector<f64>, tau: DVector<f64>) -> Result<Self> {
        let net = Network { w, u, m, tau };
        net.check()?;
        Ok(net)
    }

    /// Builds a network from row-major weights, broadcasting a scalar time constant.
    pub fn from_rows(w: &[Vec<f64>], u: &[f64], m: &[f64], tau: f64) -> Result<Self> {
        let n = w.len();
        let w = rows_to_matrix(w, n)?;
        Network::new(w, DVector::from_column_slice(u), DVector::from_column_slice(m), DVector::from_element(n, tau))
    }

    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }

    /// Errors on the first violation that makes the dynamics ill-defined
    /// (shape, non-positive `m` or `tau`, non-finite entries).
    pub fn check(&self) -> Result<()> {
        let report = validate_network(self, false);
        match report.violations.first() {
            None => Ok(()),
            Some(Violation::Dimension(msg)) => Err(Error::Dimension(msg.clone())),
            Some(v) => Err(Error::InvalidNetwork(v.to_string())),
        }
    }

    pub fn node_signs(&self) -> Vec<NodeSign> {
        (0..self.w.ncols()).map(|j| NodeSign::of_column(self.w.column(j).iter().copied())).collect()
    }

    /// `[v]_0^m` applied coordinate-wise.
    pub fn clip(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().zip(self.m.iter()).map(|(&x, &m)| x.clamp(0.0, m)))
    }

    /// Returns a copy with rows and columns reordered so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Network {
        let n = self.len();
        Network {
            w: DMatrix::from_fn(n, n, |i, j| self.w[(perm[i], perm[j])]),
            u: DVector::from_fn(n, |i, _| self.u[perm[i]]),
            m: DVector::from_fn(n, |i, _| self.m[perm[i]]),
            tau: DVector::from_fn(n, |i, _| self.tau[perm[i]]),
        }
    }

    /// Short stable digest of the network contents, used for trajectory provenance.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for v in self.w.iter().chain(self.u.iter()).chain(self.m.iter()).chain(self.tau.iter()) {
            hasher.update(v.to_le_bytes());
        }
        let bytes = hasher.finalize();
        bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], ncols_hint: usize) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(ncols_hint, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Dimension(format!("row {} has {} entries, expected {}", i + 1, r.len(), ncols)));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// A time constant given either per node or as one value for all nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSpec {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl TauSpec {
    fn expand(&self, n: usize) -> DVector<f64> {
        match self {
            TauSpec::Uniform(t) => DVector::from_element(n, *t),
            TauSpec::PerNode(v) => DVector::from_column_slice(v),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    u: Vec<f64>,
    m: Vec<f64>,
    tau: TauSpec,
}

impl TryFrom<RawNetwork> for Network {
    type Error = Error;

    // Shape problems other than ragged rows are kept so that validation can report them.
    fn try_from(raw: RawNetwork) -> Result<Self> {
        let n = raw.w.len();
        Ok(Network {
            w: rows_to_matrix(&raw.w, n)?,
            u: DVector::from_vec(raw.u),
            m: DVector::from_vec(raw.m),
            tau: raw.tau.expand(n),
        })
    }
}

impl From<Network> for RawNetwork {
    fn from(net: Network) -> Self {
        RawNetwork {
            w: matrix_to_rows(&net.w),
            u: net.u.iter().copied().collect(),
            m: net.m.iter().copied().collect(),
            tau: TauSpec::PerNode(net.tau.iter().copied().collect()),
        }
    }
}

/// Sign class of a node, read off its outgoing column of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeSign {
    Excitatory,
    Inhibitory,
    Zero,
    /// Column with entries of both signs; violates Dale's law.
    Mixed,
}

impl NodeSign {
    pub fn of_column(col: impl Iterator<Item = f64>) -> NodeSign {
        let (mut pos, mut neg) = (false, false);
        for v in col {
            pos |= v > 0.0;
            neg |= v < 0.0;
        }
        match (pos, neg) {
            (true, true) => NodeSign::Mixed,
            (true, false) => NodeSign::Excitatory,
            (false, true) => NodeSign::Inhibitory,
            (false, false) => NodeSign::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Dimension(String),
    NonFinite(String),
    /// 1-based node index.
    NonPositiveM {
        node: usize,
        value: f64,
    },
    NonPositiveTau {
        node: usize,
        value: f64,
    },
    /// 1-based column index.
    Dale {
        column: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Violation::NonFinite(msg) => write!(f, "non-finite entry in {msg}"),
            Violation::NonPositiveM { node, value } => write!(f, "m_{node} not positive ({value})"),
            Violation::NonPositiveTau { node, value } => write!(f, "tau_{node} not positive ({value})"),
            Violation::Dale { column } => write!(f, "column {column} of W has mixed signs (Dale's law)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub signs: Vec<NodeSign>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_network(net: &Network, require_dale: bool) -> ValidationReport {
    let mut violations = Vec::new();
    let n = net.w.nrows();
    if net.w.ncols() != n {
        violations.push(Violation::Dimension(format!("W is {}x{}, not square", n, net.w.ncols())));
    }
    for (name, len) in [("u", net.u.len()), ("m", net.m.len()), ("tau", net.tau.len())] {
        if len != n {
            violations.push(Violation::Dimension(format!("{name} has length {len}, expected {n}")));
        }
    }
    for (name, finite) in [
        ("W", net.w.iter().all(|v| v.is_finite())),
        ("u", net.u.iter().all(|v| v.is_finite())),
        ("m", net.m.iter().all(|v| v.is_finite())),
        ("tau", net.tau.iter().all(|v| v.is_finite())),
    ] {
        if !finite {
            violations.push(Violation::NonFinite(name.to_string()));
        }
    }
    for (i, &v) in net.m.iter().enumerate() {
        if !(v > 0.0) {
            violations.push(Violation::NonPositiveM { node: i + 1, value: v });
        }
    }
    for (i, &v) in net.tau.iter().enumerate() {
        if !(v > 0.0) {
            violations.push(Violation::NonPositiveTau { node: i + 1, value: v });
        }
    }
    let signs = net.node_signs();
    if require_dale {
        for (j, s) in signs.iter().enumerate() {
            if *s == NodeSign::Mixed {
                violations.push(Violation::Dale { column: j + 1 });
            }
        }
    }
    ValidationReport { violations, signs }
}

/// A two-node excitatory-inhibitory pair with `W = [[a, -b], [c, -d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EIPairParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub m1: f64,
    pub m2: f64,
    pub u1: f64,
    pub u2: f64,
}

impl EIPairParams {
    pub fn check(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d, self.m1, self.m2, self.u1, self.u2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite E-I pair parameter".into()));
        }
        if self.a < 0.0 || self.b < 0.0 || self.c < 0.0 || self.d < 0.0 {
            return Err(Error::InvalidNetwork("E-I pair weights a, b, c, d must be nonnegative".into()));
        }
        if !(self.m1 > 0.0 && self.m2 > 0.0) {
            return Err(Error::InvalidNetwork("E-I pair maximal rates must be positive".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[self.a, -self.b, self.c, -self.d])
    }

    pub fn to_network(&self, tau: f64) -> Network {
        Network {
            w: self.weights(),
            u: DVector::from_column_slice(&[self.u1, self.u2]),
            m: DVector::from_column_slice(&[self.m1, self.m2]),
            tau: DVector::from_element(2, tau),
        }
    }
}

/// `n` excitatory nodes and one inhibitory node, in block form
///
/// ```text
/// W = [ a  -b ]     u = [ u_e   ]     m = [ m_e   ]
///     [ c  -d ]         [ u_inh ]         [ m_inh ]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleInhibitoryNetwork {
    #[serde(with = "rows")]
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
    pub u_e: Vec<f64>,
    pub u_inh: f64,
    pub m_e: Vec<f64>,
    pub m_inh: f64,
}

impl SingleInhibitoryNetwork {
    pub fn n_excitatory(&self) -> usize {
        self.b.len()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.b.len();
        if self.a.nrows() != n || self.a.ncols() != n || self.c.len() != n || self.u_e.len() != n || self.m_e.len() != n
        {
            return Err(Error::Dimension(format!("single-inhibitory blocks disagree on n = {n}")));
        }
        if n == 0 {
            return Err(Error::Dimension("need at least one excitatory node".into()));
        }
        let nonneg = self.a.iter().chain(&self.b).chain(&self.c).all(|&v| v >= 0.0) && self.d >= 0.0;
        if !nonneg {
            return Err(Error::InvalidNetwork("blocks a, b, c and d must be nonnegative".into()));
        }
        if !(self.m_e.iter().all(|&v| v > 0.0) && self.m_inh > 0.0) {
            return Err(Error::InvalidNetwork("maximal rates must be positive".into()));
        }
        Ok(())
    }

    /// Full input vector `(u_e, u_inh)`.
    pub fn input(&self) -> Vec<f64> {
        let mut u = self.u_e.clone();
        u.push(self.u_inh);
        u
    }

    pub fn with_input(&self, u: &[f64]) -> SingleInhibitoryNetwork {
        let n = self.n_excitatory();
        SingleInhibitoryNetwork { u_e: u[..n].to_vec(), u_inh: u[n], ..self.clone() }
    }

    pub fn to_network(&self, tau: f64) -> Network {
        let n = self.n_excitatory();
        let w = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => self.a[(i, j)],
            (true, false) => -self.b[i],
            (false, true) => self.c[j],
            (false, false) => -self.d,
        });
        let mut m = self.m_e.clone();
        m.push(self.m_inh);
        Network {
            w,
            u: DVector::from_vec(self.input()),
            m: DVector::from_vec(m),
            tau: DVector::from_element(n + 1, tau),
        }
    }

    /// Reads the block structure from a network whose last node is the inhibitory one.
    pub fn from_network(net: &Network) -> Result<Self> {
        net.check()?;
        let big_n = net.len();
        if big_n < 2 {
            return Err(Error::Dimension("need at least two nodes".into()));
        }
        let n = big_n - 1;
        let s = SingleInhibitoryNetwork {
            a: net.w.view((0, 0), (n, n)).into_owned(),
            b: (0..n).map(|i| -net.w[(i, n)]).collect(),
            c: (0..n).map(|j| net.w[(n, j)]).collect(),
            d: -net.w[(n, n)],
            u_e: net.u.iter().take(n).copied().collect(),
            u_inh: net.u[n],
            m_e: net.m.iter().take(n).copied().collect(),
            m_inh: net.m[n],
        };
        s.check()?;
        Ok(s)
    }
}

/// `n` E-I pairs coupled from excitatory nodes, to excitatory nodes through
/// `ae` and to inhibitory nodes through `ai`. Row `i` of a coupling matrix
/// collects the inputs received by pair `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPairNetwork", into = "RawPairNetwork")]
pub struct EIPairNetwork {
    pub pairs: Vec<EIPairParams>,
    pub ae: DMatrix<f64>,
    pub ai: DMatrix<f64>,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPairNetwork {
    pairs: Vec<EIPairParams>,
    #[serde(rename = "Ae")]
    ae: Vec<Vec<f64>>,
    #[serde(rename = "Ai", default)]
    ai: Option<Vec<Vec<f64>>>,
    tau: TauSpec,
}

impl TryFrom<RawPairNetwork> for EIPairNetwork {
    type Error = Error;

    fn try_from(raw: RawPairNetwork) -> Result<Self> {
        let n = raw.pairs.len();
        let ae = rows_to_matrix(&raw.ae, n)?;
        let ai = match raw.ai {
            Some(rows) => rows_to_matrix(&rows, n)?,
            None => DMatrix::zeros(n, n),
        };
        let tau = raw.tau.expand(n).iter().copied().collect();
        let pn = EIPairNetwork { pairs: raw.pairs, ae, ai, tau };
        pn.check()?;
        Ok(pn)
    }
}

impl From<EIPairNetwork> for RawPairNetwork {
    fn from(pn: EIPairNetwork) -> Self {
        RawPairNetwork {
            pairs: pn.pairs,
            ae: matrix_to_rows(&pn.ae),
            ai: Some(matrix_to_rows(&pn.ai)),
            tau: TauSpec::PerNode(pn.tau),
        }
    }
}

impl EIPairNetwork {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.pairs.len();
        for (name, a) in [("Ae", &self.ae), ("Ai", &self.ai)] {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Dimension(format!("{name} is {}x{}, expected {n}x{n}", a.nrows(), a.ncols())));
            }
            if a.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidNetwork(format!("{name} must be nonnegative")));
            }
            if (0..n).any(|i| a[(i, i)] != 0.0) {
                return Err(Error::InvalidNetwork(format!("{name} must have a zero diagonal")));
            }
        }
        if self.tau.len() != n {
            return Err(Error::Dimension(format!("tau has length {}, expected {n}", self.tau.len())));
        }
        if self.tau.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidNetwork("time constants must be positive".into()));
        }
        for p in &self.pairs {
            p.check()?;
        }
        Ok(())
    }

    pub fn is_e_to_e_only(&self) -> bool {
        self.ai.iter().all(|&v| v == 0.0)
    }
}

/// Expands a network of E-I pairs into a `2n`-node [`Network`] ordered
/// `(E_1, I_1, E_2, I_2, ...)`.
pub fn flatten_ei_pair_network(pn: &EIPairNetwork) -> Result<Network> {
    pn.check()?;
    let n = pn.len();
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    let mut u = DVector::zeros(2 * n);
    let mut m = DVector::zeros(2 * n);
    let mut tau = DVector::zeros(2 * n);
    for (i, p) in pn.pairs.iter().enumerate() {
        let (e, inh) = (2 * i, 2 * i + 1);
        w[(e, e)] = p.a;
        w[(e, inh)] = -p.b;
        w[(inh, e)] = p.c;
        w[(inh, inh)] = -p.d;
        u[e] = p.u1;
        u[inh] = p.u2;
        m[e] = p.m1;
        m[inh] = p.m2;
        tau[e] = pn.tau[i];
        tau[inh] = pn.tau[i];
        for j in 0..n {
            // A^e (x) [1 0; 0 0] and A^i (x) [0 0; 1 0]
            w[(e, 2 * j)] += pn.ae[(i, j)];
            w[(inh, 2 * j)] += pn.ai[(i, j)];
        }
    }
    Ok(Network { w, u, m, tau })
}

mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::rows_to_matrix(&rows, rows.len()).map_err(serde::de::Error::custom)
    }
}
