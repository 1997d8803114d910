//! Signature databases, nearest-neighbour queries and the handcrafted
//! ScanContext baseline.

use std::collections::HashSet;

use crate::descriptor::PolarDescriptor;
use crate::error::{Error, Result};
use crate::evaluation::Top1;
use crate::grid::Grid;
use crate::spectral::{flat_distance, SpectralSignature};
use crate::trajectory::Pose2D;

/// Slack allowed on the unit norm; signatures read back from `f32` storage
/// are normalized only to single precision.
const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseEntry {
    pub id: u64,
    pub signature: SpectralSignature,
    pub pose: Pose2D,
    pub session: String,
}

#[derive(Debug, Clone, Default)]
pub struct SignatureDatabase {
    entries: Vec<DatabaseEntry>,
    ids: HashSet<u64>,
}

impl SignatureDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, entry: DatabaseEntry) -> Result<()> {
        if let Some(first) = self.entries.first() {
            if first.signature.values.shape() != entry.signature.values.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "signature shape {:?} differs from database shape {:?}",
                    entry.signature.values.shape(),
                    first.signature.values.shape()
                )));
            }
        }
        let norm = entry.signature.norm();
        if !(norm == 0.0 || (norm - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(Error::ShapeMismatch(format!("signature {} has norm {norm}, expected 1 or 0", entry.id)));
        }
        if !self.ids.insert(entry.id) {
            return Err(Error::DuplicateId(entry.id));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn from_entries(entries: impl IntoIterator<Item = DatabaseEntry>) -> Result<Self> {
        let mut db = Self::new();
        for e in entries {
            db.add(e)?;
        }
        Ok(db)
    }

    pub fn entries(&self) -> &[DatabaseEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The `k` nearest entries as `(id, distance)`, ascending, ties to the lower id.
pub fn query_top_k(db: &SignatureDatabase, q: &SpectralSignature, k: usize) -> Result<Vec<(u64, f64)>> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if k > db.len() {
        return Err(Error::InvalidConfig(format!("k = {k} exceeds database size {}", db.len())));
    }
    let shape = db.entries[0].signature.values.shape();
    if q.values.shape() != shape {
        return Err(Error::ShapeMismatch(format!("query shape {:?} differs from database shape {shape:?}", q.values.shape())));
    }
    let mut scored: Vec<(u64, f64)> = db
        .entries
        .iter()
        .map(|e| (e.id, flat_distance(e.signature.values.as_slice(), q.values.as_slice())))
        .collect();
    let order = |a: &(u64, f64), b: &(u64, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, order);
    }
    scored.truncate(k);
    scored.sort_by(order);
    Ok(scored)
}

/// Exhaustive best match of every query in a plain signature list; ties go
/// to the lower database index.
pub fn nearest_neighbours(queries: &[SpectralSignature], db: &[SpectralSignature]) -> Result<Vec<Top1>> {
    let first = db.first().ok_or(Error::EmptyDatabase)?;
    let shape = first.values.shape();
    queries
        .iter()
        .map(|q| {
            if q.values.shape() != shape {
                return Err(Error::ShapeMismatch(format!("query shape {:?} vs database {:?}", q.values.shape(), shape)));
            }
            let mut best = Top1 { index: 0, distance: f64::INFINITY };
            for (i, d) in db.iter().enumerate() {
                if d.values.shape() != shape {
                    return Err(Error::ShapeMismatch(format!("database entry {i} has shape {:?}", d.values.shape())));
                }
                let dist = flat_distance(q.values.as_slice(), d.values.as_slice());
                if dist < best.distance {
                    best = Top1 { index: i, distance: dist };
                }
            }
            Ok(best)
        })
        .collect()
}

/// Queries x database similarities, `-distance`, with id axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub query_ids: Vec<u64>,
    pub db_ids: Vec<u64>,
    pub values: Grid,
}

impl SimilarityMatrix {
    /// CSV with a header row of database ids; each row starts with its query id.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query_id");
        for id in &self.db_ids {
            out.push_str(&format!(",{id}"));
        }
        out.push('\n');
        for (i, qid) in self.query_ids.iter().enumerate() {
            out.push_str(&qid.to_string());
            for v in self.values.row(i) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn similarity_matrix(queries: &SignatureDatabase, db: &SignatureDatabase) -> Result<SimilarityMatrix> {
    if queries.is_empty() || db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let shape = db.entries[0].signature.values.shape();
    if queries.entries[0].signature.values.shape() != shape {
        return Err(Error::ShapeMismatch("query and database signature shapes differ".into()));
    }
    let values = Grid::from_fn(queries.len(), db.len(), |i, j| {
        -flat_distance(queries.entries[i].signature.values.as_slice(), db.entries[j].signature.values.as_slice())
    });
    Ok(SimilarityMatrix {
        query_ids: queries.entries.iter().map(|e| e.id).collect(),
        db_ids: db.entries.iter().map(|e| e.id).collect(),
        values,
    })
}

/// Squared column norms. Keeping them squared makes identical columns give a
/// cosine of exactly one, since `sqrt(s * s) == s` in IEEE arithmetic.
fn column_norms_sq(g: &Grid) -> Vec<f64> {
    (0..g.cols()).map(|c| (0..g.rows()).map(|r| g.get(r, c) * g.get(r, c)).sum::<f64>()).collect()
}

/// Mean column cosine distance after shifting `b` by `shift` columns.
fn aligned_distance(a: &Grid, b: &Grid, a_norms_sq: &[f64], b_norms_sq: &[f64], shift: usize, scratch: &mut Vec<f64>) -> f64 {
    let (rows, cols) = a.shape();
    scratch.clear();
    for c in 0..cols {
        // Column c of b shifted by `shift` is column c - shift of b.
        let cb = (c + cols - shift) % cols;
        let (na, nb) = (a_norms_sq[c], b_norms_sq[cb]);
        let d = if na == 0.0 && nb == 0.0 {
            0.0
        } else if na == 0.0 || nb == 0.0 {
            1.0
        } else {
            let dot: f64 = (0..rows).map(|r| a.get(r, c) * b.get(r, cb)).sum();
            (1.0 - dot / (na * nb).sqrt()).max(0.0)
        };
        scratch.push(d);
    }
    // Summing in sorted order makes the result independent of which argument
    // is shifted, so the distance is exactly symmetric.
    scratch.sort_by(f64::total_cmp);
    scratch.iter().sum::<f64>() / cols as f64
}

/// ScanContext distance: best mean column cosine distance over all circular
/// shifts of `b`, with the argmin shift (ties to the smallest shift).
pub fn sc_distance(a: &PolarDescriptor, b: &PolarDescriptor) -> Result<(f64, usize)> {
    if a.values.shape() != b.values.shape() {
        return Err(Error::ShapeMismatch(format!(
            "descriptor shapes {:?} and {:?} differ",
            a.values.shape(),
            b.values.shape()
        )));
    }
    let (an, bn) = (column_norms_sq(&a.values), column_norms_sq(&b.values));
    let mut scratch = Vec::with_capacity(a.sectors());
    let mut best = (f64::INFINITY, 0);
    for s in 0..a.sectors() {
        let d = aligned_distance(&a.values, &b.values, &an, &bn, s, &mut scratch);
        if d < best.0 {
            best = (d, s);
        }
    }
    Ok((best.0.clamp(0.0, 1.0), best.1))
}

fn key_distance(a: &[f64], b: &[f64]) -> f64 {
    flat_distance(a, b)
}

/// Ring-key prefilter keeping `ceil(candidate_frac * N)` entries, then the
/// exact ScanContext distance. Returns `(database index, distance)`.
pub fn coarse_to_fine_query(db: &[PolarDescriptor], q: &PolarDescriptor, candidate_frac: f64) -> Result<(usize, f64)> {
    let keys: Vec<Vec<f64>> = db.iter().map(PolarDescriptor::ring_key).collect();
    coarse_to_fine_with_keys(db, &keys, q, candidate_frac)
}

/// [`coarse_to_fine_query`] with precomputed database ring keys.
pub fn coarse_to_fine_with_keys(
    db: &[PolarDescriptor],
    keys: &[Vec<f64>],
    q: &PolarDescriptor,
    candidate_frac: f64,
) -> Result<(usize, f64)> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if !(candidate_frac > 0.0 && candidate_frac <= 1.0) {
        return Err(Error::InvalidConfig(format!("candidate fraction must lie in (0, 1], got {candidate_frac}")));
    }
    if keys.len() != db.len() {
        return Err(Error::ShapeMismatch(format!("{} ring keys for {} descriptors", keys.len(), db.len())));
    }
    let n = db.len();
    let keep = ((candidate_frac * n as f64).ceil() as usize).clamp(1, n);
    let qk = q.ring_key();
    let mut ranked: Vec<(f64, usize)> = keys.iter().enumerate().map(|(i, k)| (key_distance(k, &qk), i)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut candidates: Vec<usize> = ranked[..keep].iter().map(|c| c.1).collect();
    candidates.sort_unstable();
    let mut best = (usize::MAX, f64::INFINITY);
    for i in candidates {
        let (d, _) = sc_distance(q, &db[i])?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::Modality;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_signature(rng: &mut ChaCha8Rng) -> SpectralSignature {
        let mut g = Grid::from_fn(32, 32, |_, _| rng.random_range(0.0..1.0));
        let n = g.norm();
        g.as_mut_slice().iter_mut().for_each(|v| *v /= n);
        SpectralSignature { values: g }
    }

    fn entry(id: u64, signature: SpectralSignature) -> DatabaseEntry {
        DatabaseEntry { id, signature, pose: Pose2D::new(0.0, 0.0, 0.0, 0.0), session: "s".into() }
    }

    fn random_db(rng: &mut ChaCha8Rng, n: usize) -> SignatureDatabase {
        SignatureDatabase::from_entries((0..n as u64).map(|i| entry(i * 3 + 1, unit_signature(rng)))).unwrap()
    }

    fn descriptor(rng: &mut ChaCha8Rng, density: f64) -> PolarDescriptor {
        PolarDescriptor {
            modality: Modality::Lidar,
            values: Grid::from_fn(40, 120, |_, _| if rng.random_bool(density) { 1.0 } else { 0.0 }),
        }
    }

    #[test]
    fn database_rejects_duplicates_and_unnormalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut db = random_db(&mut rng, 3);
        assert!(matches!(db.add(entry(1, unit_signature(&mut rng))), Err(Error::DuplicateId(1))));
        let mut bad = unit_signature(&mut rng);
        bad.values.as_mut_slice()[0] += 1.0;
        assert!(db.add(entry(99, bad)).is_err());
        assert!(db.add(entry(100, SpectralSignature::zeros())).is_ok());
    }

    #[test]
    fn self_query_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let db = random_db(&mut rng, 50);
        let q = db.entries()[17].signature.clone();
        let top = query_top_k(&db, &q, 1).unwrap();
        assert_eq!(top, vec![(db.entries()[17].id, 0.0)]);
    }

    #[test]
    fn full_k_is_a_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let db = random_db(&mut rng, 40);
        let q = unit_signature(&mut rng);
        let all = query_top_k(&db, &q, 40).unwrap();
        assert_eq!(all.len(), 40);
        let mut ids: Vec<u64> = all.iter().map(|p| p.0).collect();
        ids.sort_unstable();
        assert_eq!(ids, db.entries().iter().map(|e| e.id).collect::<Vec<_>>());
        assert!(all.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn top_k_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let db = random_db(&mut rng, 500);
        for _ in 0..10 {
            let q = unit_signature(&mut rng);
            // Oracle: squared distances by explicit loops, full sort, take 5.
            let mut oracle: Vec<(u64, f64)> = db
                .entries()
                .iter()
                .map(|e| {
                    let mut s = 0.0;
                    for r in 0..32 {
                        for c in 0..32 {
                            let d = e.signature.values.get(r, c) - q.values.get(r, c);
                            s += d * d;
                        }
                    }
                    (e.id, s.sqrt())
                })
                .collect();
            oracle.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            let got = query_top_k(&db, &q, 5).unwrap();
            for (g, o) in got.iter().zip(&oracle[..5]) {
                assert_eq!(g.0, o.0);
                assert!((g.1 - o.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ties_break_to_lower_id() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = unit_signature(&mut rng);
        let db = SignatureDatabase::from_entries([entry(9, s.clone()), entry(2, s.clone()), entry(5, s.clone())]).unwrap();
        let ids: Vec<u64> = query_top_k(&db, &s, 3).unwrap().iter().map(|p| p.0).collect();
        assert_eq!(ids, vec![2, 5, 9]);
    }

    #[test]
    fn query_errors() {
        let db = SignatureDatabase::new();
        assert!(matches!(query_top_k(&db, &SpectralSignature::zeros(), 1), Err(Error::EmptyDatabase)));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let db = random_db(&mut rng, 3);
        assert!(query_top_k(&db, &SpectralSignature::zeros(), 4).is_err());
    }

    #[test]
    fn similarity_identity_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let db = random_db(&mut rng, 8);
        let sim = similarity_matrix(&db, &db).unwrap();
        for i in 0..8 {
            assert_eq!(sim.values.get(i, i), 0.0);
        }
        let mut a = Grid::zeros(32, 32);
        a.set(0, 0, 1.0);
        let mut b = Grid::zeros(32, 32);
        b.set(5, 5, 1.0);
        let qa = SignatureDatabase::from_entries([entry(0, SpectralSignature { values: a })]).unwrap();
        let qb = SignatureDatabase::from_entries([entry(1, SpectralSignature { values: b })]).unwrap();
        let s = similarity_matrix(&qa, &qb).unwrap();
        assert!((s.values.get(0, 0) + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn similarity_matches_entrywise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_db(&mut rng, 20);
        let d = random_db(&mut rng, 30);
        let sim = similarity_matrix(&q, &d).unwrap();
        assert_eq!(sim.values.shape(), (20, 30));
        for i in 0..20 {
            for j in 0..30 {
                let a = q.entries()[i].signature.values.as_slice();
                let b = d.entries()[j].signature.values.as_slice();
                let oracle = -a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                assert!((sim.values.get(i, j) - oracle).abs() < 1e-12);
                assert!((-2.0..=0.0).contains(&sim.values.get(i, j)));
            }
        }
        let csv = sim.to_csv();
        assert_eq!(csv.lines().count(), 21);
        assert!(csv.starts_with("query_id,1,4,"));
    }

    /// Direct transcription of the definition, no shared helpers.
    fn sc_oracle(a: &Grid, b: &Grid) -> (f64, usize) {
        let (rows, cols) = a.shape();
        let mut best = (f64::INFINITY, 0);
        for s in 0..cols {
            let mut total = 0.0;
            for c in 0..cols {
                let src = (c + cols - s) % cols;
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for r in 0..rows {
                    dot += a.get(r, c) * b.get(r, src);
                    na += a.get(r, c) * a.get(r, c);
                    nb += b.get(r, src) * b.get(r, src);
                }
                total += match (na == 0.0, nb == 0.0) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => 1.0,
                    _ => 1.0 - dot / (na.sqrt() * nb.sqrt()),
                };
            }
            let d = total / cols as f64;
            if d < best.0 - 1e-12 {
                best = (d, s);
            }
        }
        best
    }

    #[test]
    fn sc_identity_and_shift_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = descriptor(&mut rng, 0.2);
        assert_eq!(sc_distance(&d, &d).unwrap(), (0.0, 0));
        // b = a shifted by -17 needs a further shift of 17 to realign.
        let b = d.shift_sectors(-17);
        let (dist, shift) = sc_distance(&d, &b).unwrap();
        assert!(dist < 1e-12);
        assert_eq!(shift, 17);
    }

    #[test]
    fn sc_matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let a = descriptor(&mut rng, 0.15);
            let mut b = descriptor(&mut rng, 0.15);
            // Keep some fully empty columns to exercise the zero-column rules.
            for r in 0..40 {
                b.values.set(r, 3, 0.0);
            }
            let (d, s) = sc_distance(&a, &b).unwrap();
            let (od, os) = sc_oracle(&a.values, &b.values);
            assert!((d - od).abs() < 1e-12);
            assert_eq!(s, os);
        }
    }

    #[test]
    fn sc_zero_columns() {
        let z = PolarDescriptor { modality: Modality::Lidar, values: Grid::zeros(40, 120) };
        assert_eq!(sc_distance(&z, &z).unwrap(), (0.0, 0));
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let full = PolarDescriptor { modality: Modality::Lidar, values: Grid::from_fn(40, 120, |_, _| rng.random_range(0.1..1.0)) };
        assert_eq!(sc_distance(&z, &full).unwrap().0, 1.0);
    }

    #[test]
    fn coarse_to_fine_full_fraction_is_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let db: Vec<PolarDescriptor> = (0..20).map(|_| descriptor(&mut rng, 0.1)).collect();
        let q = descriptor(&mut rng, 0.1);
        let (i, d) = coarse_to_fine_query(&db, &q, 1.0).unwrap();
        let oracle = (0..20)
            .map(|k| (k, sc_oracle(&q.values, &db[k].values).0))
            .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 - 1e-12 { c } else { b });
        assert_eq!(i, oracle.0);
        assert!((d - oracle.1).abs() < 1e-12);
    }

    #[test]
    fn coarse_to_fine_finds_present_query() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let db: Vec<PolarDescriptor> = (0..200).map(|_| descriptor(&mut rng, 0.1)).collect();
        let q = db[123].shift_sectors(40);
        assert_eq!(coarse_to_fine_query(&db, &q, 0.01).unwrap(), (123, 0.0));
    }

    #[test]
    fn coarse_to_fine_matches_two_stage_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let db: Vec<PolarDescriptor> = (0..200)
            .map(|_| {
                let density = rng.random_range(0.05..0.3);
                descriptor(&mut rng, density)
            })
            .collect();
        for _ in 0..5 {
            let density = rng.random_range(0.05..0.3);
            let q = descriptor(&mut rng, density);
            let mean = |g: &Grid, r: usize| (0..120).map(|c| g.get(r, c)).sum::<f64>() / 120.0;
            let mut ranked: Vec<(f64, usize)> = (0..200)
                .map(|k| {
                    let d2: f64 = (0..40).map(|r| (mean(&db[k].values, r) - mean(&q.values, r)).powi(2)).sum();
                    (d2.sqrt(), k)
                })
                .collect();
            ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut cands: Vec<usize> = ranked[..2].iter().map(|p| p.1).collect();
            cands.sort_unstable();
            let oracle = cands
                .iter()
                .map(|&k| (k, sc_oracle(&q.values, &db[k].values).0))
                .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 - 1e-12 { c } else { b });
            let got = coarse_to_fine_query(&db, &q, 0.01).unwrap();
            assert_eq!(got.0, oracle.0);
            assert!((got.1 - oracle.1).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_to_fine_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let q = descriptor(&mut rng, 0.1);
        assert!(matches!(coarse_to_fine_query(&[], &q, 0.5), Err(Error::EmptyDatabase)));
        assert!(coarse_to_fine_query(&[q.clone()], &q, 0.0).is_err());
        assert!(coarse_to_fine_query(&[q.clone()], &q, 1.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sc_symmetric_and_rotation_invariant(seed in any::<u64>(), k in 0isize..120) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = descriptor(&mut rng, 0.2);
            let b = descriptor(&mut rng, 0.2);
            prop_assert_eq!(sc_distance(&a, &b).unwrap().0, sc_distance(&b, &a).unwrap().0);
            prop_assert_eq!(sc_distance(&a, &a.shift_sectors(k)).unwrap().0, 0.0);
        }

        #[test]
        fn top_k_non_decreasing(seed in any::<u64>(), k in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let db = random_db(&mut rng, 30);
            let q = unit_signature(&mut rng);
            let top = query_top_k(&db, &q, k).unwrap();
            prop_assert_eq!(top.len(), k);
            prop_assert!(top.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn nearest_neighbours_agree_with_database_query() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut sig = || {
            let mut g = Grid::from_fn(4, 5, |_, _| rng.random_range(-1.0..1.0));
            let n = g.norm();
            g.as_mut_slice().iter_mut().for_each(|v| *v /= n);
            SpectralSignature { values: g }
        };
        let db: Vec<SpectralSignature> = (0..30).map(|_| sig()).collect();
        let queries: Vec<SpectralSignature> = (0..10).map(|_| sig()).collect();
        let table = SignatureDatabase::from_entries(db.iter().enumerate().map(|(i, s)| DatabaseEntry {
            id: i as u64,
            signature: s.clone(),
            pose: Pose2D::new(0.0, 0.0, 0.0, 0.0),
            session: "db".into(),
        }))
        .unwrap();
        for (q, top) in queries.iter().zip(nearest_neighbours(&queries, &db).unwrap()) {
            let best = query_top_k(&table, q, 1).unwrap()[0];
            assert_eq!((top.index as u64, top.distance), best);
        }
        assert!(matches!(nearest_neighbours(&queries, &[]), Err(Error::EmptyDatabase)));
    }
}
