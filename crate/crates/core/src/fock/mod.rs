//! Few-photon Fock states over labeled optical modes.
//!
//! A mode is identified by a [`ModeLabel`]: spatial path, polarization, and
//! an internal index modelling every degree of freedom that can make photons
//! distinguishable (spectral/temporal mode mismatch). States are sparse maps
//! from photon occupation lists to complex amplitudes. Photon number is fixed
//! per state and supported up to 4.
//!
//! Evolution, post-selection, and reduction to polarization qubits live in
//! [`evolve`]; transfer matrices in [`transfer`].

mod evolve;
mod transfer;

pub use evolve::{coincidence_amplitudes, evolve, postselect, reduce_to_qubits};
pub use transfer::TransferMatrix;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::qubit::C64;

/// Amplitudes below this magnitude are dropped after evolution.
pub const PRUNE_TOL: f64 = 1e-14;

/// Photon polarization. Ordering (`H < V`) fixes matrix block layout; the
/// logical-qubit mapping (`V = 0`, `H = 1`) is applied only when reducing to
/// qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    /// Index into 2x2 polarization blocks (`H = 0`, `V = 1`).
    #[inline]
    pub fn block_index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    /// Logical qubit index (`V = 0`, `H = 1`).
    #[inline]
    pub fn logical_index(self) -> usize {
        match self {
            Polarization::H => 1,
            Polarization::V => 0,
        }
    }

    /// The orthogonal polarization.
    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => write!(f, "H"),
            Polarization::V => write!(f, "V"),
        }
    }
}

/// One optical mode: spatial path, polarization, internal index.
///
/// The derived ordering (spatial, then polarization, then internal) is the
/// canonical mode order used for occupation lists and compiled matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub spatial: u16,
    pub polarization: Polarization,
    pub internal: u8,
}

impl ModeLabel {
    pub fn new(spatial: u16, polarization: Polarization, internal: u8) -> Self {
        Self {
            spatial,
            polarization,
            internal,
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}:{}", self.spatial, self.polarization, self.internal)
    }
}

/// Sorted photon occupation list; repeats denote multiple photons per mode.
pub type Occupation = Vec<ModeLabel>;

/// A pure few-photon state: sparse amplitudes over occupation lists.
///
/// Invariants enforced on construction: every term has the same photon
/// number `n` with `1 <= n <= 4`, occupation lists are sorted, and the
/// squared norm lies in `(0, 1]` up to tolerance. Sub-unitary evolution may
/// shrink the norm; [`postselect`] renormalizes and reports the lost weight
/// as a success probability.
#[derive(Debug, Clone)]
pub struct PhotonicState {
    terms: BTreeMap<Occupation, C64>,
    photons: usize,
}

impl PhotonicState {
    /// Build a state from `(occupation, amplitude)` pairs.
    ///
    /// Occupations are sorted, duplicate entries merged, and negligible
    /// amplitudes pruned.
    pub fn new<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Occupation, C64)>,
    {
        let mut map: BTreeMap<Occupation, C64> = BTreeMap::new();
        for (mut occ, amp) in terms {
            occ.sort_unstable();
            *map.entry(occ).or_insert_with(|| C64::new(0.0, 0.0)) += amp;
        }
        map.retain(|_, amp| amp.norm() > PRUNE_TOL);
        let mut photons = None;
        for occ in map.keys() {
            let n = occ.len();
            match photons {
                None => photons = Some(n),
                Some(m) if m != n => {
                    return Err(Error::DimensionMismatch(format!(
                        "mixed photon numbers {m} and {n} in one state"
                    )))
                }
                _ => {}
            }
        }
        let photons = photons.ok_or(Error::ZeroNorm)?;
        if !(1..=4).contains(&photons) {
            return Err(Error::PhotonNumber(photons));
        }
        let state = Self {
            terms: map,
            photons,
        };
        let norm2 = state.norm_sqr();
        if norm2 <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        if norm2 > 1.0 + 1e-9 {
            return Err(Error::InvalidMatrix {
                kind: "photonic state",
                reason: format!("squared norm {norm2} exceeds 1"),
            });
        }
        Ok(state)
    }

    /// Single-term state with unit amplitude.
    pub fn single(occupation: Occupation) -> Result<Self> {
        Self::new([(occupation, C64::new(1.0, 0.0))])
    }

    /// Photon number shared by all terms.
    pub fn photon_number(&self) -> usize {
        self.photons
    }

    /// Squared norm; 1 for normalized states, less after lossy evolution.
    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitude of one occupation (zero if absent). The query is sorted
    /// before lookup.
    pub fn amplitude(&self, occupation: &[ModeLabel]) -> C64 {
        let mut key = occupation.to_vec();
        key.sort_unstable();
        self.terms
            .get(&key)
            .copied()
            .unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    /// Iterate terms in canonical (sorted-key) order.
    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &C64)> {
        self.terms.iter()
    }

    /// Number of stored terms.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Smallest internal dimension containing every internal index used.
    pub fn internal_dimension(&self) -> usize {
        self.terms
            .keys()
            .flat_map(|occ| occ.iter().map(|m| m.internal as usize + 1))
            .max()
            .unwrap_or(1)
    }

    /// Rescale so the squared norm is 1.
    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        let s = C64::new(1.0 / n2.sqrt(), 0.0);
        Ok(Self {
            terms: self.terms.iter().map(|(k, a)| (k.clone(), a * s)).collect(),
            photons: self.photons,
        })
    }

    pub(crate) fn from_parts(terms: BTreeMap<Occupation, C64>, photons: usize) -> Self {
        Self { terms, photons }
    }
}

/// Exact spatial occupancy requirement used for post-selection.
///
/// The pattern lists the required photon count per spatial path; every path
/// not listed (or listed with count 0) must hold no photons. Two distinct
/// patterns are therefore disjoint events, and the family of all patterns
/// with the right total photon number is complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyPattern {
    counts: BTreeMap<u16, usize>,
}

impl OccupancyPattern {
    /// Require exactly `count` photons in each listed path, none elsewhere.
    pub fn exact<I: IntoIterator<Item = (u16, usize)>>(counts: I) -> Self {
        let counts = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        Self { counts }
    }

    /// One photon in each listed path, none elsewhere: coincidence detection.
    pub fn coincidence(paths: &[u16]) -> Self {
        Self::exact(paths.iter().map(|&p| (p, 1)))
    }

    /// Does an occupation list satisfy the pattern?
    pub fn matches(&self, occupation: &[ModeLabel]) -> bool {
        let mut seen: BTreeMap<u16, usize> = BTreeMap::new();
        for mode in occupation {
            *seen.entry(mode.spatial).or_insert(0) += 1;
        }
        seen == self.counts
    }

    /// Total photon number the pattern demands.
    pub fn photon_number(&self) -> usize {
        self.counts.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::c64;

    fn m(s: u16, p: Polarization, i: u8) -> ModeLabel {
        ModeLabel::new(s, p, i)
    }

    #[test]
    fn mode_labels_order_spatial_then_polarization_then_internal() {
        let mut labels = vec![
            m(1, Polarization::H, 0),
            m(0, Polarization::V, 1),
            m(0, Polarization::H, 1),
            m(0, Polarization::H, 0),
            m(0, Polarization::V, 0),
        ];
        labels.sort_unstable();
        assert_eq!(
            labels,
            vec![
                m(0, Polarization::H, 0),
                m(0, Polarization::H, 1),
                m(0, Polarization::V, 0),
                m(0, Polarization::V, 1),
                m(1, Polarization::H, 0),
            ]
        );
    }

    #[test]
    fn construction_sorts_and_merges_terms() {
        let a = m(0, Polarization::H, 0);
        let b = m(1, Polarization::V, 0);
        let state = PhotonicState::new([
            (vec![b, a], c64(0.5, 0.0)),
            (vec![a, b], c64(0.25, 0.0)),
        ])
        .unwrap();
        assert_eq!(state.term_count(), 1);
        assert_eq!(state.amplitude(&[a, b]), c64(0.75, 0.0));
        assert_eq!(state.photon_number(), 2);
    }

    #[test]
    fn mixed_photon_numbers_rejected() {
        let a = m(0, Polarization::H, 0);
        let b = m(1, Polarization::V, 0);
        let res = PhotonicState::new([
            (vec![a], c64(0.5, 0.0)),
            (vec![a, b], c64(0.5, 0.0)),
        ]);
        assert!(res.is_err());
    }

    #[test]
    fn norm_above_one_rejected() {
        let a = m(0, Polarization::H, 0);
        assert!(PhotonicState::new([(vec![a], c64(1.1, 0.0))]).is_err());
    }

    #[test]
    fn five_photons_rejected() {
        let occ: Occupation = (0..5).map(|k| m(k, Polarization::H, 0)).collect();
        assert!(matches!(
            PhotonicState::single(occ),
            Err(Error::PhotonNumber(5))
        ));
    }

    #[test]
    fn pattern_matching_is_exact_per_path() {
        let pat = OccupancyPattern::coincidence(&[0, 1]);
        let h = Polarization::H;
        assert!(pat.matches(&[m(0, h, 0), m(1, h, 0)]));
        assert!(pat.matches(&[m(0, Polarization::V, 1), m(1, h, 0)]));
        assert!(!pat.matches(&[m(0, h, 0), m(0, h, 0)]));
        assert!(!pat.matches(&[m(0, h, 0), m(2, h, 0)]));
        assert_eq!(pat.photon_number(), 2);

        let bunched = OccupancyPattern::exact([(0, 2)]);
        assert!(bunched.matches(&[m(0, h, 0), m(0, Polarization::V, 0)]));
        assert!(!bunched.matches(&[m(0, h, 0), m(1, h, 0)]));
    }
}
