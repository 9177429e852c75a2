//! Second-quantized evolution, post-selection, and qubit reduction.
//!
//! For an `n`-photon input occupation `S` and output occupation `T`, the
//! transition amplitude is
//!
//! ```text
//! <T| U |S> = per(M[T, S]) / sqrt(prod_i s_i! * prod_j t_j!)
//! ```
//!
//! where `M[T, S]` repeats the transfer-matrix column of each input mode by
//! its multiplicity and likewise the row of each output mode, and `per` is
//! the matrix permanent. With `n <= 4` the permanents are evaluated exactly
//! by permutation expansion.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix4};

use crate::error::{Error, Result};
use crate::fock::{ModeLabel, Occupation, OccupancyPattern, PhotonicState, TransferMatrix, PRUNE_TOL};
use crate::qubit::{c64, C64, TwoQubitState};

/// Evolve a state through a transfer matrix.
///
/// Every mode occupied by the state must appear among the matrix input
/// modes. The output squared norm never exceeds the input squared norm
/// (up to roundoff); it shrinks when the matrix is sub-unitary.
pub fn evolve(state: &PhotonicState, transfer: &TransferMatrix) -> Result<PhotonicState> {
    let n = state.photon_number();
    let matrix = transfer.matrix();
    let out_modes = transfer.output_modes();

    let mut accum: BTreeMap<Occupation, C64> = BTreeMap::new();
    for (occ, &amp) in state.terms() {
        let mut cols = Vec::with_capacity(n);
        for mode in occ {
            let j = transfer
                .column_of(*mode)
                .ok_or_else(|| Error::UnmappedMode(mode.to_string()))?;
            cols.push(j);
        }
        let in_fact = multiplicity_factorial_indices(&cols);

        // Rows reachable from any occupied column; all other output
        // amplitudes vanish.
        let mut reachable: Vec<usize> = Vec::new();
        for i in 0..matrix.nrows() {
            if cols.iter().any(|&j| matrix[(i, j)].norm_sqr() > 0.0) {
                reachable.push(i);
            }
        }
        if reachable.is_empty() {
            continue;
        }

        let mut rows = vec![0usize; n];
        enumerate_multisets(&reachable, n, &mut rows, 0, 0, &mut |rows| {
            let p = permanent(matrix, rows, &cols);
            if p.norm() <= PRUNE_TOL {
                return;
            }
            let out_fact = multiplicity_factorial_indices(rows);
            let value = amp * p / c64((in_fact * out_fact).sqrt(), 0.0);
            let key: Occupation = rows.iter().map(|&i| out_modes[i]).collect();
            // Rows come out sorted by index, not by label order.
            let mut key = key;
            key.sort_unstable();
            *accum.entry(key).or_insert_with(|| c64(0.0, 0.0)) += value;
        });
    }

    accum.retain(|_, a| a.norm() > PRUNE_TOL);
    if accum.is_empty() {
        return Err(Error::ZeroNorm);
    }
    Ok(PhotonicState::from_parts(accum, n))
}

/// Keep the terms matching a spatial pattern; renormalize; report weight.
///
/// Returns the renormalized conditional state and the success probability
/// (the squared norm of the kept component). A pattern that keeps nothing is
/// the expected failure mode of a post-selected experiment and yields
/// [`Error::NullPostSelection`].
pub fn postselect(
    state: &PhotonicState,
    pattern: &OccupancyPattern,
) -> Result<(PhotonicState, f64)> {
    let kept: BTreeMap<Occupation, C64> = state
        .terms()
        .filter(|(occ, _)| pattern.matches(occ))
        .map(|(occ, amp)| (occ.clone(), *amp))
        .collect();
    let probability: f64 = kept.values().map(|a| a.norm_sqr()).sum();
    if kept.is_empty() || probability <= 0.0 {
        return Err(Error::NullPostSelection);
    }
    let scale = c64(1.0 / probability.sqrt(), 0.0);
    let normalized = kept
        .into_iter()
        .map(|(occ, amp)| (occ, amp * scale))
        .collect();
    Ok((
        PhotonicState::from_parts(normalized, state.photon_number()),
        probability,
    ))
}

/// Unnormalized coincidence amplitudes over `(polarization, internal)` of the
/// photon in `control_path` tensored with the same for `target_path`.
///
/// Terms that are not a one-photon-per-path coincidence between the two
/// designated paths are skipped (projected out). The returned vector has
/// dimension `(2 * internal_dim)^2`, indexed by
/// `(logical_c * d + int_c) * 2d + (logical_t * d + int_t)`.
pub fn coincidence_amplitudes(
    state: &PhotonicState,
    control_path: u16,
    target_path: u16,
    internal_dim: usize,
) -> Result<DVector<C64>> {
    if control_path == target_path {
        return Err(Error::DimensionMismatch(
            "control and target paths must differ".into(),
        ));
    }
    let side = 2 * internal_dim;
    let mut psi = DVector::zeros(side * side);
    for (occ, &amp) in state.terms() {
        let Some((c_mode, t_mode)) = coincidence_pair(occ, control_path, target_path) else {
            continue;
        };
        if c_mode.internal as usize >= internal_dim || t_mode.internal as usize >= internal_dim {
            return Err(Error::DimensionMismatch(format!(
                "internal index exceeds declared dimension {internal_dim}"
            )));
        }
        let a = c_mode.polarization.logical_index() * internal_dim + c_mode.internal as usize;
        let b = t_mode.polarization.logical_index() * internal_dim + t_mode.internal as usize;
        psi[a * side + b] += amp;
    }
    Ok(psi)
}

/// Trace out internal labels and return the two-qubit polarization state.
///
/// Every term must hold exactly one photon in `control_path` and one in
/// `target_path`: bunched or stray terms are a domain error (post-select
/// first). The result is trace-normalized.
pub fn reduce_to_qubits(
    state: &PhotonicState,
    control_path: u16,
    target_path: u16,
) -> Result<TwoQubitState> {
    if state.photon_number() != 2 {
        return Err(Error::PhotonNumber(state.photon_number()));
    }
    for (occ, _) in state.terms() {
        if coincidence_pair(occ, control_path, target_path).is_none() {
            return Err(Error::NotCoincident(format!(
                "term [{}]",
                occ.iter()
                    .map(|m| m.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
    }
    let d = state.internal_dimension();
    let psi = coincidence_amplitudes(state, control_path, target_path, d)?;
    let side = 2 * d;

    // rho[qc*2+qt, qc'*2+qt'] = sum over internal labels of psi psi^*.
    let mut rho = Matrix4::zeros();
    for qc in 0..2 {
        for qt in 0..2 {
            for qc2 in 0..2 {
                for qt2 in 0..2 {
                    let mut sum = c64(0.0, 0.0);
                    for ic in 0..d {
                        for it in 0..d {
                            let left = (qc * d + ic) * side + (qt * d + it);
                            let right = (qc2 * d + ic) * side + (qt2 * d + it);
                            sum += psi[left] * psi[right].conj();
                        }
                    }
                    rho[(qc * 2 + qt, qc2 * 2 + qt2)] = sum;
                }
            }
        }
    }
    let tr = rho.trace().re;
    if tr <= 1e-14 {
        return Err(Error::ZeroNorm);
    }
    TwoQubitState::new(rho / c64(tr, 0.0))
}

/// Split a two-photon occupation into (control photon, target photon) if it
/// is exactly one per designated path.
fn coincidence_pair(
    occ: &[ModeLabel],
    control_path: u16,
    target_path: u16,
) -> Option<(ModeLabel, ModeLabel)> {
    if occ.len() != 2 {
        return None;
    }
    let (a, b) = (occ[0], occ[1]);
    if a.spatial == control_path && b.spatial == target_path {
        Some((a, b))
    } else if a.spatial == target_path && b.spatial == control_path {
        Some((b, a))
    } else {
        None
    }
}

/// `prod_k m_k!` over the multiplicities of a sorted-or-not index list.
fn multiplicity_factorial_indices(indices: &[usize]) -> f64 {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut fact = 1.0;
    let mut run = 1usize;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            fact *= run as f64;
        } else {
            run = 1;
        }
    }
    fact
}

/// Enumerate non-decreasing index lists (multisets) of length `n` drawn from
/// `pool`, invoking `visit` with each.
fn enumerate_multisets(
    pool: &[usize],
    n: usize,
    scratch: &mut Vec<usize>,
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == n {
        visit(scratch);
        return;
    }
    for k in start..pool.len() {
        scratch[depth] = pool[k];
        enumerate_multisets(pool, n, scratch, depth + 1, k, visit);
    }
}

/// Permanent of the submatrix with the given rows and columns (with
/// multiplicity), by direct permutation expansion. Exact for `n <= 4`.
fn permanent(matrix: &DMatrix<C64>, rows: &[usize], cols: &[usize]) -> C64 {
    let n = rows.len();
    debug_assert_eq!(n, cols.len());
    let mut used = [false; 4];
    perm_rec(matrix, rows, cols, 0, &mut used)
}

fn perm_rec(
    matrix: &DMatrix<C64>,
    rows: &[usize],
    cols: &[usize],
    depth: usize,
    used: &mut [bool; 4],
) -> C64 {
    let n = rows.len();
    if depth == n {
        return c64(1.0, 0.0);
    }
    let mut total = c64(0.0, 0.0);
    for k in 0..n {
        if used[k] {
            continue;
        }
        let factor = matrix[(rows[depth], cols[k])];
        if factor.norm_sqr() == 0.0 {
            continue;
        }
        used[k] = true;
        total += factor * perm_rec(matrix, rows, cols, depth + 1, used);
        used[k] = false;
    }
    total
}
