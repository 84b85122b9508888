//! Enumeration and classification of second-order vacuum-mediated
//! interaction (2VMI) pair diagrams.
//!
//! A pair diagram at order n describes one detected molecule (a) and one
//! partner (b) exchanging a single vacuum photon while n classical field
//! interactions are distributed between them. Its timeline, earliest vertex
//! first, interleaves:
//!
//! * the n field vertices, chronologically ordered;
//! * b's vacuum emission, which closes b and must follow every field vertex
//!   assigned to b (of which there is at least one);
//! * a's vacuum absorption, which follows the emission (retardation) and may
//!   fall anywhere among a's later field vertices;
//! * the detection vertex on a, always last.
//!
//! Counting by m = number of field vertices preceding the vacuum emission
//! gives N(n) = Σ_{m=1}^{n} (2^m − 1)(n − m + 1): 1, 5, 16 for n = 1, 2, 3.
//!
//! Classification: with f_a/f_b field vertices on each molecule, molecule a
//! carries f_a + 1 interactions (fields plus the vacuum absorption) and b
//! carries f_b. A diagram is a *local-field* correction when one molecule
//! merely dresses what the other sees linearly (f_a = 0 or f_b = 1);
//! otherwise it is *cascading*. Cascading diagrams with balanced orders
//! (f_a + 1 = f_b) require odd n and dominate phase-matched detection; at
//! n = 1 the single diagram is local-field, so the balanced-cascading count
//! starts at 0, 5, 21 for n = 1, 3, 5.

use crate::{Result, VmiError};

/// Which molecule a field vertex acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// The detected molecule.
    A,
    /// The partner molecule that emits the vacuum photon.
    B,
}

/// One vertex in a diagram timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    /// Classical field interaction; the payload is the pulse index (0-based)
    /// after any permutation has been applied.
    Field(usize),
    /// Vacuum-photon emission on molecule b (closes b).
    VacuumEmit,
    /// Vacuum-photon absorption on molecule a.
    VacuumAbsorb,
    /// Heterodyne detection vertex on molecule a (always last).
    Detection,
}

/// Interaction-count classification of a pair diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// One molecule dresses the field the other sees linearly
    /// (f_a = 0 or f_b = 1).
    LocalField,
    /// Both molecules respond nonlinearly to the exchanged excitation.
    Cascading,
}

/// A single 2VMI pair diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramTerm {
    /// Number of classical field interactions n.
    pub order: usize,
    /// Target molecule of each field vertex, indexed by chronological slot.
    pub assignment: Vec<Target>,
    /// Pulse index carried by each chronological field slot
    /// (identity when permutations are not expanded).
    pub permutation: Vec<usize>,
    /// Complete timeline, earliest vertex first; always ends in
    /// [`VertexKind::Detection`].
    pub global_order: Vec<VertexKind>,
    /// Interactions on the detected molecule (its fields + vacuum absorption).
    pub order_a: usize,
    /// Interactions on the partner molecule (its fields; the emission is the
    /// trace-closing vertex and is not counted).
    pub order_b: usize,
    /// Local-field vs cascading character.
    pub classification: Classification,
    /// True for cascading diagrams with order_a = order_b.
    pub equal_order_cascading: bool,
}

impl DiagramTerm {
    fn from_layout(
        order: usize,
        assignment: &[Target],
        vacuum_emit_slot: usize,
        vacuum_absorb_slot: usize,
        permutation: &[usize],
    ) -> DiagramTerm {
        // vacuum_emit_slot = number of field vertices before the emission;
        // vacuum_absorb_slot = number of field vertices before the absorption
        // (≥ vacuum_emit_slot).
        let mut global_order = Vec::with_capacity(order + 3);
        for (slot, &pulse) in permutation.iter().enumerate() {
            if slot == vacuum_emit_slot {
                global_order.push(VertexKind::VacuumEmit);
            }
            if slot == vacuum_absorb_slot && vacuum_absorb_slot >= vacuum_emit_slot {
                global_order.push(VertexKind::VacuumAbsorb);
            }
            global_order.push(VertexKind::Field(pulse));
        }
        if vacuum_emit_slot == order {
            global_order.push(VertexKind::VacuumEmit);
        }
        if vacuum_absorb_slot == order {
            global_order.push(VertexKind::VacuumAbsorb);
        }
        global_order.push(VertexKind::Detection);

        let f_b = assignment.iter().filter(|t| **t == Target::B).count();
        let f_a = order - f_b;
        let order_a = f_a + 1;
        let order_b = f_b;
        let classification = if f_a == 0 || f_b == 1 {
            Classification::LocalField
        } else {
            Classification::Cascading
        };
        DiagramTerm {
            order,
            assignment: assignment.to_vec(),
            permutation: permutation.to_vec(),
            global_order,
            order_a,
            order_b,
            classification,
            equal_order_cascading: classification == Classification::Cascading
                && order_a == order_b,
        }
    }
}

/// Total number of pair diagrams at order n:
/// Σ_{m=1}^{n} (2^m − 1)(n − m + 1).
///
/// # Errors
/// [`VmiError::Unsupported`] for n = 0.
pub fn count_total(order: usize) -> Result<u64> {
    if order == 0 {
        return Err(VmiError::Unsupported(
            "diagram counting requires at least one field interaction".to_string(),
        ));
    }
    let n = order as u64;
    let mut total = 0u64;
    for m in 1..=n {
        total += ((1u64 << m) - 1) * (n - m + 1);
    }
    Ok(total)
}

/// Number of balanced cascading diagrams (order_a = order_b) at odd order n.
/// Even orders cannot balance f_a + 1 = f_b with f_a + f_b = n and are
/// rejected. The count comes from the enumerator, not a closed formula, so
/// the n = 1 case (where the lone balanced diagram is local-field) is 0.
///
/// # Errors
/// [`VmiError::Unsupported`] for n = 0 or even n.
pub fn count_equal_order_cascading(order: usize) -> Result<u64> {
    if order == 0 || order % 2 == 0 {
        return Err(VmiError::Unsupported(format!(
            "balanced cascading diagrams require odd order, got {order}"
        )));
    }
    let base = enumerate_base(order);
    Ok(base.iter().filter(|t| t.equal_order_cascading).count() as u64)
}

/// Enumerate the base diagrams (chronological field slots carry pulse
/// indices 0..n in order).
fn enumerate_base(order: usize) -> Vec<DiagramTerm> {
    let identity: Vec<usize> = (0..order).collect();
    let mut out = Vec::new();
    // m = number of field vertices before the vacuum emission.
    for m in 1..=order {
        // Assign each of the first m fields to a or b, at least one on b;
        // fields after the emission are necessarily on a.
        for mask in 1u32..(1u32 << m) {
            let mut assignment = vec![Target::A; order];
            for (slot, t) in assignment.iter_mut().enumerate().take(m) {
                if mask & (1 << slot) != 0 {
                    *t = Target::B;
                }
            }
            // The absorption sits after the emission, anywhere among the
            // remaining n − m field vertices: slots m..=n.
            for absorb in m..=order {
                out.push(DiagramTerm::from_layout(
                    order,
                    &assignment,
                    m,
                    absorb,
                    &identity,
                ));
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, remaining: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..remaining.len() {
            let v = remaining.remove(i);
            prefix.push(v);
            rec(prefix, remaining, out);
            prefix.pop();
            remaining.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

/// Enumerate 2VMI pair diagrams at the given order.
///
/// With `include_permutations = false` the chronological field slots carry
/// pulse indices in order (1, 5, 16 diagrams at n = 1, 2, 3). With
/// `include_permutations = true` each diagram is expanded over the pulse
/// orderings that contribute to the measured signal: at n ≤ 2 every diagram
/// enters (n! copies each: 1 and 10), while at n = 3 only the balanced
/// cascading subset survives phase-matched detection and is expanded
/// (5 × 3! = 30).
///
/// # Errors
/// [`VmiError::Unsupported`] for n = 0.
pub fn enumerate_2vmi(order: usize, include_permutations: bool) -> Result<Vec<DiagramTerm>> {
    if order == 0 {
        return Err(VmiError::Unsupported(
            "diagram enumeration requires at least one field interaction".to_string(),
        ));
    }
    let base = enumerate_base(order);
    if !include_permutations {
        return Ok(base);
    }
    let keep: Vec<&DiagramTerm> = if order >= 3 {
        base.iter().filter(|t| t.equal_order_cascading).collect()
    } else {
        base.iter().collect()
    };
    let perms = permutations(order);
    let mut out = Vec::with_capacity(keep.len() * perms.len());
    for term in keep {
        for perm in &perms {
            let mut expanded = term.clone();
            expanded.permutation = perm.clone();
            expanded.global_order = expanded
                .global_order
                .iter()
                .map(|v| match v {
                    VertexKind::Field(slot) => VertexKind::Field(perm[*slot]),
                    other => *other,
                })
                .collect();
            out.push(expanded);
        }
    }
    Ok(out)
}
