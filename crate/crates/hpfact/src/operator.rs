//! Discrete bilinear singular-integral operators.
//!
//! `apply_t` realizes `T(f1, f2)(x) = sum K(x, y, z) f1(y) f2(z) h^{2n}`
//! over the lattice, and `apply_partial_adjoint` realizes the two partial
//! adjoints defined by the pairings
//! `<T1*(a, b), phi> = <a, T(phi, b)>` and `<T2*(a, b), phi> = <b, T(a, phi)>`.
//!
//! Near-diagonal quadrature cells are excluded by a predicate on the kernel
//! argument triple `(k0, k1, k2)`: a cell is skipped when `|k0 - k1| < h` or
//! `|k0 - k2| < h`.  Because the predicate depends only on the kernel
//! arguments — not on which factor plays which role — the discrete pairing
//! identities above hold exactly, up to summation-order roundoff.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{dist, GridFunction, IndexBox, KahanSum, Point};
use crate::kernel::KernelSpec;

/// Quadrature result: the output samples on the requested box, plus the
/// number of near-diagonal cells that were skipped (counted only where the
/// product of input samples is nonzero).
#[derive(Clone, Debug)]
pub struct ApplyOutput {
    pub func: GridFunction,
    pub skipped_cells: u64,
}

/// Nonzero samples of a grid function as (point, value) pairs.
fn nonzero_samples(f: &GridFunction) -> Vec<(Point, f64)> {
    let spec = f.spec();
    let mut out = Vec::new();
    if let Some(b) = f.support_box() {
        for idx in b.iter() {
            let v = f.sample(idx);
            if v != 0.0 {
                out.push((spec.point(idx), v));
            }
        }
    }
    out
}

/// Shared quadrature engine.  For each output point `x` of `eval_box` it
/// accumulates `K(triple(x, u, v)) * a(u) * b(v) * h^{2n}` over the nonzero
/// samples of `a` and `b`, where `triple` assigns the three points to kernel
/// slots.  Cells whose kernel arguments come within one spacing of the
/// argument singularity are skipped and counted.
fn quadrature(
    k: &KernelSpec,
    a: &GridFunction,
    b: &GridFunction,
    eval_box: &IndexBox,
    triple: impl Fn(Point, Point, Point) -> (Point, Point, Point) + Sync,
) -> Result<ApplyOutput> {
    let spec = a.spec();
    if spec != b.spec() {
        return Err(Error::GridMismatch { what: "operator inputs" });
    }
    if k.dim() != spec.dim() {
        return Err(Error::GridMismatch { what: "kernel and grid dimensions" });
    }
    let dim = spec.dim();
    let h = spec.spacing();
    let weight = spec.cell_volume() * spec.cell_volume();
    let left = nonzero_samples(a);
    let right = nonzero_samples(b);
    if left.is_empty() || right.is_empty() {
        return Ok(ApplyOutput { func: GridFunction::zero(spec), skipped_cells: 0 });
    }
    let outputs: Vec<[usize; 2]> = eval_box.iter().collect();
    let results: Vec<(f64, u64)> = outputs
        .par_iter()
        .map(|idx| {
            let x = spec.point(*idx);
            let mut acc = KahanSum::new();
            let mut skipped = 0u64;
            for &(u, fu) in &left {
                for &(v, gv) in &right {
                    let (k0, k1, k2) = triple(x, u, v);
                    if dist(k0, k1, dim) < h || dist(k0, k2, dim) < h {
                        skipped += 1;
                        continue;
                    }
                    acc.add(k.eval(k0, k1, k2) * fu * gv);
                }
            }
            (acc.value() * weight, skipped)
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut skipped_cells = 0u64;
    for (v, s) in results {
        samples.push(v);
        skipped_cells += s;
    }
    Ok(ApplyOutput {
        func: GridFunction::from_box_samples(spec, *eval_box, samples),
        skipped_cells,
    })
}

/// `T(f1, f2)` evaluated at every lattice point of `eval_box`.
pub fn apply_t(
    k: &KernelSpec,
    f1: &GridFunction,
    f2: &GridFunction,
    eval_box: &IndexBox,
) -> Result<ApplyOutput> {
    quadrature(k, f1, f2, eval_box, |x, u, v| (x, u, v))
}

/// The partial adjoint in slot `l` evaluated on `eval_box`.
///
/// With `l = 1` the output satisfies `<T1*(a, b), phi> = <a, T(phi, b)>`:
/// the output point sits in the first kernel input slot and `a` supplies the
/// kernel output slot.  With `l = 2` the output satisfies
/// `<T2*(a, b), phi> = <b, T(a, phi)>`: the output point sits in the second
/// input slot, `a` supplies the first, and `b` the output slot.
pub fn apply_partial_adjoint(
    k: &KernelSpec,
    l: usize,
    a: &GridFunction,
    b: &GridFunction,
    eval_box: &IndexBox,
) -> Result<ApplyOutput> {
    match l {
        1 => quadrature(k, a, b, eval_box, |x, u, v| (u, x, v)),
        2 => quadrature(k, a, b, eval_box, |x, u, v| (v, u, x)),
        _ => Err(Error::InvalidParameter(format!("adjoint slot must be 1 or 2, got {l}"))),
    }
}
