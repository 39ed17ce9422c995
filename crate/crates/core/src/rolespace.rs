//! Role vectors and tensor-product binding of subject–predicate–object triplets.
//!
//! A triplet `(S_s, S_p, S_o)` is bound as `S_s r_sᵀ + S_p r_pᵀ + S_o r_oᵀ`,
//! a `d × R` matrix, where the roles are distinct columns of a Sylvester
//! Hadamard matrix scaled to unit 2-norm. Because the roles are orthonormal,
//! right-multiplying the bound matrix by a role recovers that slot's filler
//! exactly.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scenegraph::SceneRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Subject,
    Predicate,
    Object,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Subject, Slot::Predicate, Slot::Object];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Slot::Subject => "subject",
            Slot::Predicate => "predicate",
            Slot::Object => "object",
        }
    }
}

/// Default role columns for subject, predicate and object. Column 0 (all
/// positive) stays unused so every bound role is zero-mean.
pub const DEFAULT_ROLE_COLUMNS: [usize; 3] = [1, 2, 3];

/// Orthonormal columns of a normalized Sylvester Hadamard matrix plus the
/// slot-to-column assignment used for binding.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleBasis {
    order: usize,
    columns: Vec<Tensor>,
    assignment: [usize; 3],
}

/// Builds the order-`order` basis with the default assignment.
pub fn hadamard_roles(order: usize) -> Result<RoleBasis> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::Argument(alloc::format!(
            "Hadamard order must be a power of two, got {order}"
        )));
    }
    let scale = 1.0 / libm::sqrt(order as f64);
    // Sylvester: H[i][j] = (-1)^popcount(i & j)
    let columns = (0..order)
        .map(|j| {
            Tensor::vector(
                (0..order)
                    .map(|i| {
                        if (i & j).count_ones() % 2 == 0 {
                            scale
                        } else {
                            -scale
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    let assignment = if order >= 4 {
        DEFAULT_ROLE_COLUMNS
    } else {
        [0; 3]
    };
    Ok(RoleBasis {
        order,
        columns,
        assignment,
    })
}

impl RoleBasis {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn column(&self, j: usize) -> &Tensor {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Tensor] {
        &self.columns
    }

    pub fn assignment(&self) -> [usize; 3] {
        self.assignment
    }

    /// Re-targets the slots onto other (distinct, in-range) columns.
    pub fn with_assignment(mut self, assignment: [usize; 3]) -> Result<Self> {
        let [a, b, c] = assignment;
        if a == b || b == c || a == c || assignment.iter().any(|&k| k >= self.order) {
            return Err(Error::Argument(alloc::format!(
                "role columns {assignment:?} must be distinct and below {}",
                self.order
            )));
        }
        self.assignment = assignment;
        Ok(self)
    }

    pub fn role(&self, slot: Slot) -> &Tensor {
        &self.columns[self.assignment[slot.index()]]
    }

    /// Matrix whose columns are the role vectors.
    pub fn matrix(&self) -> Tensor {
        let r = self.order;
        let mut data = alloc::vec![0.0; r * r];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &v) in col.data().iter().enumerate() {
                data[i * r + j] = v;
            }
        }
        Tensor::matrix(r, r, data).expect("square")
    }

    /// `max |r_kᵀ r_j − δ_kj|` over all column pairs.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (k, a) in self.columns.iter().enumerate() {
            for (j, b) in self.columns.iter().enumerate() {
                let target = if k == j { 1.0 } else { 0.0 };
                let d = a.dot(b).expect("equal lengths");
                worst = worst.max(libm::fabs(d - target));
            }
        }
        worst
    }

    fn check_binding(&self) -> Result<()> {
        if self.order < 4 {
            return Err(Error::Argument(alloc::format!(
                "three-slot binding needs order >= 4, basis has {}",
                self.order
            )));
        }
        Ok(())
    }
}

/// Subject, predicate and object feature vectors of one scene-graph relation.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub subject: Tensor,
    pub predicate: Tensor,
    pub object: Tensor,
    pub labels: Option<[String; 3]>,
}

impl Triplet {
    pub fn new(subject: Vec<f64>, predicate: Vec<f64>, object: Vec<f64>) -> Result<Self> {
        let d = subject.len();
        for (slot, v) in Slot::ALL.iter().zip([&subject, &predicate, &object]) {
            if v.is_empty() || v.len() != d {
                return Err(Error::Argument(alloc::format!(
                    "{} has dimension {}, expected {d}",
                    slot.name(),
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Argument(alloc::format!(
                    "{} has a non-finite entry",
                    slot.name()
                )));
            }
        }
        Ok(Triplet {
            subject: Tensor::vector(subject),
            predicate: Tensor::vector(predicate),
            object: Tensor::vector(object),
            labels: None,
        })
    }

    pub fn with_labels(mut self, s: &str, p: &str, o: &str) -> Self {
        self.labels = Some([s.into(), p.into(), o.into()]);
        self
    }

    pub fn dim(&self) -> usize {
        self.subject.len()
    }

    pub fn slot(&self, slot: Slot) -> &Tensor {
        match slot {
            Slot::Subject => &self.subject,
            Slot::Predicate => &self.predicate,
            Slot::Object => &self.object,
        }
    }

    /// `[S_s; S_p; S_o]`, length `3d`.
    pub fn concatenated(&self) -> Tensor {
        crate::numerics::concat(&[&self.subject, &self.predicate, &self.object])
            .expect("vectors")
    }
}

/// Bound `d × R` matrix of one triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct TpsgtrEncoding {
    pub matrix: Tensor,
    pub source: Triplet,
}

impl TpsgtrEncoding {
    pub fn flatten(&self) -> Tensor {
        flatten_encoding(self)
    }
}

pub fn bind_triplet(t: &Triplet, basis: &RoleBasis) -> Result<TpsgtrEncoding> {
    basis.check_binding()?;
    let d = t.dim();
    for slot in Slot::ALL {
        let n = t.slot(slot).len();
        if n != d {
            return Err(Error::Argument(alloc::format!(
                "{} has dimension {n}, expected {d}",
                slot.name()
            )));
        }
    }
    let r = basis.order();
    let mut data = alloc::vec![0.0; d * r];
    for slot in Slot::ALL {
        crate::numerics::kernels::outer_acc(
            t.slot(slot).data(),
            basis.role(slot).data(),
            &mut data,
        );
    }
    Ok(TpsgtrEncoding {
        matrix: Tensor::matrix(d, r, data)?,
        source: t.clone(),
    })
}

/// Recovers the filler bound to `slot`.
pub fn unbind(enc: &TpsgtrEncoding, slot: Slot, basis: &RoleBasis) -> Result<Tensor> {
    unbind_column(enc, basis.assignment()[slot.index()], basis)
}

/// Projects the encoding onto an arbitrary basis column.
pub fn unbind_column(enc: &TpsgtrEncoding, column: usize, basis: &RoleBasis) -> Result<Tensor> {
    if enc.matrix.cols() != basis.order() || column >= basis.order() {
        return Err(Error::Mismatch(alloc::format!(
            "encoding has {} role columns, basis order is {}",
            enc.matrix.cols(),
            basis.order()
        )));
    }
    enc.matrix.matvec(basis.column(column))
}

/// Row-major flattening, length `d · R`.
pub fn flatten_encoding(enc: &TpsgtrEncoding) -> Tensor {
    Tensor::vector(enc.matrix.data().to_vec())
}

/// One encoding per triplet of the record, in order.
pub fn encode_scene(rec: &SceneRecord, basis: &RoleBasis) -> Result<Vec<TpsgtrEncoding>> {
    if rec.triplets.is_empty() {
        return Err(Error::Argument(alloc::format!(
            "scene {} has no triplets",
            rec.id
        )));
    }
    rec.triplets.iter().map(|t| bind_triplet(t, basis)).collect()
}
