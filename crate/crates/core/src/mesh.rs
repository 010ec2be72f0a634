//! Rectangular device domain, its uniform tensor-product grid and the
//! classification of boundary nodes into contacts and insulating segments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Contact terminal of the device.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactName {
    Source,
    Gate,
    Drain,
}

impl ContactName {
    pub const ALL: [ContactName; 3] = [ContactName::Source, ContactName::Gate, ContactName::Drain];

    pub fn as_str(self) -> &'static str {
        match self {
            ContactName::Source => "source",
            ContactName::Gate => "gate",
            ContactName::Drain => "drain",
        }
    }
}

impl fmt::Display for ContactName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Side of the rectangle a contact lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Bottom,
    Top,
    Left,
    Right,
}

/// A Dirichlet contact: a closed interval on one edge of the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactSpec<T> {
    pub name: ContactName,
    pub edge: Edge,
    /// Interval along the edge, measured in the edge's coordinate (x for top/bottom, y for left/right).
    pub span: (T, T),
    /// Applied voltage `U`.
    pub applied_voltage: T,
    /// Boundary density scaling; `1` is an Ohmic contact, `< 1` a Schottky contact.
    pub schottky_factor: T,
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x0: T, x1: T, y0: T, y1: T) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        let tol = T::lit(1e-12);
        x >= self.x0 - tol && x <= self.x1 + tol && y >= self.y0 - tol && y <= self.y1 + tol
    }
}

/// Device description: domain extent, contacts and the highly doped regions.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceGeometry<T> {
    pub width: T,
    pub height: T,
    pub contacts: Vec<ContactSpec<T>>,
    pub nplus_regions: Vec<Rect<T>>,
    pub channel_doping: T,
    pub nplus_doping: T,
}

impl<T: Real> DeviceGeometry<T> {
    /// Default MESFET on the unit square: source, gate and drain on the top
    /// edge, n⁺ blocks under source and drain. The gate is a Schottky contact
    /// with factor 0.1, and the applied voltages are `0.1 · {0.0375, 0.075, 0.15}`.
    pub fn mesfet() -> Self {
        let alpha = T::lit(0.1);
        let contact = |name, a: f64, b: f64, u: f64, factor: T| ContactSpec {
            name,
            edge: Edge::Top,
            span: (T::lit(a), T::lit(b)),
            applied_voltage: alpha * T::lit(u),
            schottky_factor: factor,
        };
        DeviceGeometry {
            width: T::one(),
            height: T::one(),
            contacts: vec![
                contact(ContactName::Source, 0.0, 0.15, 0.0375, T::one()),
                contact(ContactName::Gate, 0.425, 0.575, 0.075, alpha),
                contact(ContactName::Drain, 0.85, 1.0, 0.15, T::one()),
            ],
            nplus_regions: vec![
                Rect::new(T::zero(), T::lit(0.25), T::lit(0.8), T::one()),
                Rect::new(T::lit(0.75), T::one(), T::lit(0.8), T::one()),
            ],
            channel_doping: T::lit(0.01),
            nplus_doping: T::one(),
        }
    }

    pub fn contact(&self, name: ContactName) -> Option<&ContactSpec<T>> {
        self.contacts.iter().find(|c| c.name == name)
    }

    /// Checks the geometric invariants that do not depend on the grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.width > T::zero() && self.height > T::zero()) {
            return Err(Error::Geometry("domain extent must be positive".into()));
        }
        if self.contacts.is_empty() {
            return Err(Error::Geometry("at least one contact is required".into()));
        }
        if !(self.channel_doping > T::zero() && self.nplus_doping > self.channel_doping) {
            return Err(Error::Geometry(
                "dopings must satisfy nplus_doping > channel_doping > 0".into(),
            ));
        }
        for (k, c) in self.contacts.iter().enumerate() {
            if self.contacts[..k].iter().any(|o| o.name == c.name) {
                return Err(Error::Geometry(format!("contact `{}` defined twice", c.name)));
            }
            let len = match c.edge {
                Edge::Top | Edge::Bottom => self.width,
                Edge::Left | Edge::Right => self.height,
            };
            let (a, b) = c.span;
            if !(a < b) || a < T::zero() || b > len {
                return Err(Error::Geometry(format!(
                    "contact `{}` span must be a nonempty interval inside its edge",
                    c.name
                )));
            }
            if !(c.schottky_factor > T::zero() && c.schottky_factor <= T::one()) {
                return Err(Error::Geometry(format!(
                    "contact `{}` schottky factor must lie in (0, 1]",
                    c.name
                )));
            }
            if !c.applied_voltage.is_finite() {
                return Err(Error::Geometry(format!("contact `{}` voltage is not finite", c.name)));
            }
        }
        for r in &self.nplus_regions {
            if !(r.x0 < r.x1 && r.y0 < r.y1)
                || r.x0 < T::zero()
                || r.y0 < T::zero()
                || r.x1 > self.width
                || r.y1 > self.height
            {
                return Err(Error::Geometry("n+ region must be a nonempty rectangle inside the domain".into()));
            }
        }
        Ok(())
    }
}

/// Role of a grid node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Neumann,
    /// Index into [`Mesh::contacts`].
    Dirichlet(usize),
}

/// Selects a subset of the boundary nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundarySelector {
    Contact(ContactName),
    Dirichlet,
    Neumann,
    All,
}

impl FromStr for BoundarySelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(BoundarySelector::Contact(ContactName::Source)),
            "gate" => Ok(BoundarySelector::Contact(ContactName::Gate)),
            "drain" => Ok(BoundarySelector::Contact(ContactName::Drain)),
            "dirichlet" => Ok(BoundarySelector::Dirichlet),
            "neumann" => Ok(BoundarySelector::Neumann),
            "boundary" | "all" => Ok(BoundarySelector::All),
            other => Err(Error::UnknownSelector(other.to_string())),
        }
    }
}

/// Uniform node-centred grid on `[0, width] × [0, height]`.
///
/// Nodes are numbered `p = i + j·nx` with `i` along x and `j` along y.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    pub nx: usize,
    pub ny: usize,
    pub hx: T,
    pub hy: T,
    pub width: T,
    pub height: T,
    kinds: Vec<NodeKind>,
    contacts: Vec<ContactName>,
}

/// Snaps `[a, b]` outward to node indices on an axis with spacing `h` and `n` nodes.
fn snap_outward<T: Real>(a: T, b: T, h: T, n: usize) -> (usize, usize) {
    let tol = T::lit(1e-9);
    let last = (n - 1) as isize;
    let lo = ((a / h + tol).floor().to_isize().unwrap_or(0)).clamp(0, last);
    let mut hi = ((b / h - tol).ceil().to_isize().unwrap_or(last)).clamp(0, last);
    let mut lo = lo;
    if hi <= lo {
        if hi < last {
            hi = lo + 1;
        } else {
            lo = hi - 1;
        }
    }
    (lo as usize, hi as usize)
}

/// Builds the grid and classifies every boundary node.
pub fn build_mesh<T: Real>(geom: &DeviceGeometry<T>, nx: usize, ny: usize) -> Result<Mesh<T>> {
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidInput(format!("grid must have at least 3×3 nodes, got {nx}×{ny}")));
    }
    geom.validate()?;
    let hx = geom.width / T::from_count(nx - 1);
    let hy = geom.height / T::from_count(ny - 1);
    let mut kinds = vec![NodeKind::Interior; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                kinds[i + j * nx] = NodeKind::Neumann;
            }
        }
    }
    let mut owner: Vec<Option<usize>> = vec![None; nx * ny];
    for (id, c) in geom.contacts.iter().enumerate() {
        let nodes: Vec<usize> = match c.edge {
            Edge::Bottom | Edge::Top => {
                let (lo, hi) = snap_outward(c.span.0, c.span.1, hx, nx);
                let j = if c.edge == Edge::Bottom { 0 } else { ny - 1 };
                (lo..=hi).map(|i| i + j * nx).collect()
            }
            Edge::Left | Edge::Right => {
                let (lo, hi) = snap_outward(c.span.0, c.span.1, hy, ny);
                let i = if c.edge == Edge::Left { 0 } else { nx - 1 };
                (lo..=hi).map(|j| i + j * nx).collect()
            }
        };
        for p in nodes {
            if let Some(other) = owner[p] {
                return Err(Error::Geometry(format!(
                    "contacts `{}` and `{}` touch after snapping to the {nx}×{ny} grid",
                    geom.contacts[other].name, c.name
                )));
            }
            owner[p] = Some(id);
            kinds[p] = NodeKind::Dirichlet(id);
        }
    }
    Ok(Mesh {
        nx,
        ny,
        hx,
        hy,
        width: geom.width,
        height: geom.height,
        kinds,
        contacts: geom.contacts.iter().map(|c| c.name).collect(),
    })
}

impl<T: Real> Mesh<T> {
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    #[inline]
    pub fn ij(&self, p: usize) -> (usize, usize) {
        (p % self.nx, p / self.nx)
    }

    #[inline]
    pub fn x(&self, p: usize) -> T {
        T::from_count(p % self.nx) * self.hx
    }

    #[inline]
    pub fn y(&self, p: usize) -> T {
        T::from_count(p / self.nx) * self.hy
    }

    #[inline]
    pub fn kind(&self, p: usize) -> NodeKind {
        self.kinds[p]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    #[inline]
    pub fn is_dirichlet(&self, p: usize) -> bool {
        matches!(self.kinds[p], NodeKind::Dirichlet(_))
    }

    #[inline]
    pub fn is_boundary(&self, p: usize) -> bool {
        let (i, j) = self.ij(p);
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Contact names in the order used by [`NodeKind::Dirichlet`].
    pub fn contacts(&self) -> &[ContactName] {
        &self.contacts
    }

    pub fn contact_id(&self, name: ContactName) -> Option<usize> {
        self.contacts.iter().position(|&c| c == name)
    }

    /// Area of the control volume around node `p` (trapezoidal quadrature weight).
    #[inline]
    pub fn area(&self, p: usize) -> T {
        let (i, j) = self.ij(p);
        let half = T::lit(0.5);
        let fx = if i == 0 || i == self.nx - 1 { half } else { T::one() };
        let fy = if j == 0 || j == self.ny - 1 { half } else { T::one() };
        self.hx * self.hy * fx * fy
    }

    /// Face length over distance for the x-edge `(p, p+1)`; `p` must not lie on the right edge.
    #[inline]
    pub fn kx(&self, p: usize) -> T {
        let j = p / self.nx;
        let fy = if j == 0 || j == self.ny - 1 { T::lit(0.5) } else { T::one() };
        self.hy * fy / self.hx
    }

    /// Face length over distance for the y-edge `(p, p+nx)`; `p` must not lie on the top edge.
    #[inline]
    pub fn ky(&self, p: usize) -> T {
        let i = p % self.nx;
        let fx = if i == 0 || i == self.nx - 1 { T::lit(0.5) } else { T::one() };
        self.hx * fx / self.hy
    }

    /// Visits every grid edge as `(p, q, k)` with `q` the east or north neighbour.
    #[inline]
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize, T)) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = i + j * self.nx;
                if i + 1 < self.nx {
                    f(p, p + 1, self.kx(p));
                }
                if j + 1 < self.ny {
                    f(p, p + self.nx, self.ky(p));
                }
            }
        }
    }

    /// Number of interior nodes.
    pub fn interior_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Interior).count()
    }

    /// Boundary node indices matching `which`, in ascending node order.
    pub fn boundary_nodes(&self, which: BoundarySelector) -> Vec<usize> {
        let target = match which {
            BoundarySelector::Contact(name) => match self.contact_id(name) {
                Some(id) => Some(id),
                None => return Vec::new(),
            },
            _ => None,
        };
        (0..self.len())
            .filter(|&p| match (which, self.kinds[p]) {
                (BoundarySelector::Contact(_), NodeKind::Dirichlet(id)) => Some(id) == target,
                (BoundarySelector::Dirichlet, NodeKind::Dirichlet(_)) => true,
                (BoundarySelector::Neumann, NodeKind::Neumann) => true,
                (BoundarySelector::All, k) => k != NodeKind::Interior,
                _ => false,
            })
            .collect()
    }

    /// Boolean Dirichlet mask over all nodes.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|p| self.is_dirichlet(p)).collect()
    }
}

/// Free-standing form of [`Mesh::boundary_nodes`] that parses a textual selector.
pub fn boundary_nodes<T: Real>(mesh: &Mesh<T>, which: &str) -> Result<Vec<usize>> {
    Ok(mesh.boundary_nodes(which.parse()?))
}
