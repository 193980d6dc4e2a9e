//! FCIDUMP integral files and the [`IntegralSet`] they describe.
//!
//! Files use 1-based orbital indices and chemists' notation `(ij|kl)`;
//! everything in memory is 0-based. Two-electron integrals are stored once per
//! 8-fold symmetry class, keyed by the lexicographically smallest image of the
//! index quadruple, with a dense copy expanded at construction time for the
//! contraction-heavy solvers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Tensor4;
use crate::mean_field::DensityMatrix;

/// Entries smaller than this are not written out.
const WRITE_THRESHOLD: f64 = 1e-14;
/// Two lines with the same canonical index must agree to this tolerance.
const DUPLICATE_TOLERANCE: f64 = 1e-12;

pub type OrbitalQuad = [usize; 4];

/// The lexicographically smallest of the eight symmetry images of `(pq|rs)`.
pub fn canonical_index(p: usize, q: usize, r: usize, s: usize) -> OrbitalQuad {
    let images = [
        [p, q, r, s],
        [q, p, r, s],
        [p, q, s, r],
        [q, p, s, r],
        [r, s, p, q],
        [s, r, p, q],
        [r, s, q, p],
        [s, r, q, p],
    ];
    *images.iter().min().unwrap()
}

/// Two-electron integrals `(pq|rs)` with 8-fold permutational symmetry.
#[derive(Debug, Clone)]
pub struct TwoBody {
    n: usize,
    canonical: BTreeMap<OrbitalQuad, f64>,
    dense: Tensor4,
}

impl PartialEq for TwoBody {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.canonical == other.canonical
    }
}

impl TwoBody {
    pub fn zeros(n: usize) -> Self {
        Self::from_canonical(n, BTreeMap::new())
    }

    /// Build from canonical representatives; keys are re-canonicalized and
    /// exact zeros are dropped (absence means zero).
    pub fn from_canonical(n: usize, entries: BTreeMap<OrbitalQuad, f64>) -> Self {
        let mut canonical = BTreeMap::new();
        for (k, v) in entries {
            if v != 0.0 {
                canonical.insert(canonical_index(k[0], k[1], k[2], k[3]), v);
            }
        }
        let mut dense = Tensor4::zeros(n);
        for (&[p, q, r, s], &v) in &canonical {
            for [a, b, c, d] in [
                [p, q, r, s],
                [q, p, r, s],
                [p, q, s, r],
                [q, p, s, r],
                [r, s, p, q],
                [s, r, p, q],
                [r, s, q, p],
                [s, r, q, p],
            ] {
                dense.set(a, b, c, d, v);
            }
        }
        TwoBody {
            n,
            canonical,
            dense,
        }
    }

    /// Build from a dense tensor, taking the value at each canonical position.
    pub fn from_dense(t: &Tensor4) -> Self {
        let n = t.dim();
        let mut entries = BTreeMap::new();
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let key = [p, q, r, s];
                        if canonical_index(p, q, r, s) == key {
                            entries.insert(key, t.get(p, q, r, s));
                        }
                    }
                }
            }
        }
        Self::from_canonical(n, entries)
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.dense.get(p, q, r, s)
    }

    pub fn dense(&self) -> &Tensor4 {
        &self.dense
    }

    pub fn canonical(&self) -> impl Iterator<Item = (&OrbitalQuad, &f64)> {
        self.canonical.iter()
    }

    pub fn n_orb(&self) -> usize {
        self.n
    }
}

/// One- and two-electron integrals of a second-quantized Hamiltonian in an
/// orthonormal spatial-orbital basis, plus the scalar core energy.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub n_orb: usize,
    pub n_elec: usize,
    pub ms2: i32,
    pub core_energy: f64,
    pub one_body: DMatrix<f64>,
    pub two_body: TwoBody,
}

impl IntegralSet {
    /// Validating constructor. `one_body` must be symmetric to 1e-10; the
    /// lower triangle is mirrored so the stored matrix is exactly symmetric.
    pub fn new(
        n_elec: usize,
        ms2: i32,
        core_energy: f64,
        one_body: DMatrix<f64>,
        two_body: TwoBody,
    ) -> Result<Self> {
        let n_orb = one_body.nrows();
        if n_orb == 0 {
            return Err(Error::InvalidInput("n_orb must be at least 1".into()));
        }
        if one_body.ncols() != n_orb {
            return Err(Error::Dimension {
                expected: n_orb,
                found: one_body.ncols(),
            });
        }
        if two_body.n_orb() != n_orb {
            return Err(Error::Dimension {
                expected: n_orb,
                found: two_body.n_orb(),
            });
        }
        if n_elec > 2 * n_orb {
            return Err(Error::InvalidInput(format!(
                "{n_elec} electrons do not fit in {n_orb} orbitals"
            )));
        }
        if (ms2.unsigned_abs() as usize) > n_elec || (n_elec as i64 + ms2 as i64) % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "MS2={ms2} incompatible with NELEC={n_elec}"
            )));
        }
        let mut h = one_body;
        for p in 0..n_orb {
            for q in 0..p {
                if (h[(p, q)] - h[(q, p)]).abs() > 1e-10 {
                    return Err(Error::InvalidInput(format!(
                        "one-body integrals not symmetric at ({p}, {q})"
                    )));
                }
                h[(q, p)] = h[(p, q)];
            }
        }
        Ok(IntegralSet {
            n_orb,
            n_elec,
            ms2,
            core_energy,
            one_body: h,
            two_body,
        })
    }

    /// `(pq|rs)` through the symmetric accessor.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_body.get(p, q, r, s)
    }

    /// Same Hamiltonian with a different electron count.
    pub fn with_electrons(&self, n_elec: usize) -> Result<Self> {
        IntegralSet::new(
            n_elec,
            if n_elec % 2 == 0 { 0 } else { 1 },
            self.core_energy,
            self.one_body.clone(),
            self.two_body.clone(),
        )
    }

    /// Closed-shell two-electron field `G(D) = J(D) − ½K(D)`, with
    /// `J_pq = Σ_rs D_rs (pq|rs)` and `K_pq = Σ_rs D_rs (pr|qs)`.
    pub fn two_electron_field(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_orb;
        let g = self.two_body.dense();
        DMatrix::from_fn(n, n, |p, q| {
            let mut acc = 0.0;
            for r in 0..n {
                for s in 0..n {
                    let drs = d[(r, s)];
                    if drs != 0.0 {
                        acc += drs * (g.get(p, q, r, s) - 0.5 * g.get(p, r, q, s));
                    }
                }
            }
            acc
        })
    }

    /// Electronic mean-field energy of a spin-summed density,
    /// `Tr[D h] + ½ Tr[D G(D)]` (core energy excluded).
    pub fn electronic_energy(&self, d: &DMatrix<f64>) -> f64 {
        let g = self.two_electron_field(d);
        d.component_mul(&(&self.one_body + g * 0.5)).sum()
    }

    /// Re-express the Hamiltonian in the orbitals given by the columns of `c`
    /// (`n_orb x m`, orthonormal columns assumed).
    pub fn rotate(&self, c: &DMatrix<f64>, n_elec: usize) -> Result<Self> {
        if c.nrows() != self.n_orb {
            return Err(Error::Dimension {
                expected: self.n_orb,
                found: c.nrows(),
            });
        }
        let h = c.transpose() * &self.one_body * c;
        let g = self.two_body.dense().transform(c);
        let ms2 = if n_elec % 2 == 0 { 0 } else { 1 };
        IntegralSet::new(n_elec, ms2, self.core_energy, h, TwoBody::from_dense(&g))
    }

    /// Block-diagonal union of two Hamiltonians with no coupling integrals.
    pub fn direct_sum(a: &IntegralSet, b: &IntegralSet) -> Result<Self> {
        let (na, nb) = (a.n_orb, b.n_orb);
        let n = na + nb;
        let mut h = DMatrix::zeros(n, n);
        h.view_mut((0, 0), (na, na)).copy_from(&a.one_body);
        h.view_mut((na, na), (nb, nb)).copy_from(&b.one_body);
        let mut entries = BTreeMap::new();
        for (k, &v) in a.two_body.canonical() {
            entries.insert(*k, v);
        }
        for (k, &v) in b.two_body.canonical() {
            entries.insert([k[0] + na, k[1] + na, k[2] + na, k[3] + na], v);
        }
        IntegralSet::new(
            a.n_elec + b.n_elec,
            a.ms2 + b.ms2,
            a.core_energy + b.core_energy,
            h,
            TwoBody::from_canonical(n, entries),
        )
    }
}

/// Parse FCIDUMP text.
pub fn parse_fcidump(text: &str) -> Result<IntegralSet> {
    let lines: Vec<&str> = text.lines().collect();
    let perr = |line: usize, message: String| Error::Parse { line, message };

    // namelist header
    let first = lines
        .iter()
        .position(|l| !l.trim().is_empty())
        .ok_or_else(|| perr(1, "empty input".into()))?;
    if !lines[first].trim_start().to_ascii_uppercase().starts_with("&FCI") {
        return Err(perr(first + 1, "expected '&FCI' namelist header".into()));
    }
    let mut header = String::new();
    let mut body_start = None;
    for (i, raw) in lines.iter().enumerate().skip(first) {
        let upper = raw.to_ascii_uppercase();
        let (content, done) = if let Some(pos) = upper.find("&END") {
            (&raw[..pos], true)
        } else if let Some(pos) = raw.find('/') {
            (&raw[..pos], true)
        } else {
            (*raw, false)
        };
        header.push_str(content);
        header.push(',');
        if done {
            body_start = Some(i + 1);
            break;
        }
    }
    let body_start = body_start.ok_or_else(|| {
        perr(first + 1, "namelist header not terminated by '&END' or '/'".into())
    })?;
    let header_line = first + 1;

    let mut header = header.replacen("&FCI", "", 1).replacen("&fci", "", 1);
    while header.contains(" =") || header.contains("= ") {
        header = header.replace(" =", "=").replace("= ", "=");
    }
    let mut norb = None;
    let mut nelec = None;
    let mut ms2 = 0i32;
    for tok in header.split(|c: char| c == ',' || c.is_whitespace()) {
        let Some((key, value)) = tok.split_once('=') else {
            continue; // continuation of a list value such as ORBSYM
        };
        let parse_int = |v: &str| {
            v.parse::<i64>()
                .map_err(|_| perr(header_line, format!("bad integer '{v}' for {key}")))
        };
        match key.to_ascii_uppercase().as_str() {
            "NORB" => norb = Some(parse_int(value)?),
            "NELEC" => nelec = Some(parse_int(value)?),
            "MS2" => ms2 = parse_int(value)? as i32,
            _ => {} // ORBSYM, ISYM, UHF, ... are ignored
        }
    }
    let norb = norb.ok_or_else(|| perr(header_line, "missing NORB".into()))?;
    let nelec = nelec.ok_or_else(|| perr(header_line, "missing NELEC".into()))?;
    if norb < 1 {
        return Err(perr(header_line, format!("NORB={norb} must be positive")));
    }
    if nelec < 0 || nelec > 2 * norb {
        return Err(perr(header_line, format!("NELEC={nelec} out of range")));
    }
    let n = norb as usize;

    let mut core: Option<(f64, usize)> = None;
    let mut one: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    let mut two: BTreeMap<OrbitalQuad, (f64, usize)> = BTreeMap::new();

    for (i, raw) in lines.iter().enumerate().skip(body_start) {
        let lineno = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(perr(lineno, format!("expected 5 fields, found {}", toks.len())));
        }
        let value: f64 = toks[0]
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| perr(lineno, format!("bad value '{}'", toks[0])))?;
        let mut idx = [0usize; 4];
        for (k, t) in toks[1..].iter().enumerate() {
            let v: usize = t
                .parse()
                .map_err(|_| perr(lineno, format!("bad index '{t}'")))?;
            if v > n {
                return Err(perr(lineno, format!("index {v} out of range [0, {n}]")));
            }
            idx[k] = v;
        }
        let check = |old: f64, old_line: usize| {
            if (old - value).abs() > DUPLICATE_TOLERANCE {
                Err(perr(
                    lineno,
                    format!("value {value} conflicts with {old} from line {old_line}"),
                ))
            } else {
                Ok(())
            }
        };
        match idx {
            [0, 0, 0, 0] => match core {
                Some((old, l)) => check(old, l)?,
                None => core = Some((value, lineno)),
            },
            [i, 0, 0, 0] if i > 0 => {} // orbital energy, not needed
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let key = (i.max(j) - 1, i.min(j) - 1);
                match one.get(&key) {
                    Some(&(old, l)) => check(old, l)?,
                    None => {
                        one.insert(key, (value, lineno));
                    }
                }
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let key = canonical_index(i - 1, j - 1, k - 1, l - 1);
                match two.get(&key) {
                    Some(&(old, ln)) => check(old, ln)?,
                    None => {
                        two.insert(key, (value, lineno));
                    }
                }
            }
            _ => {
                return Err(perr(lineno, format!("invalid index pattern {idx:?}")));
            }
        }
    }

    let mut h = DMatrix::zeros(n, n);
    for (&(p, q), &(v, _)) in &one {
        h[(p, q)] = v;
        h[(q, p)] = v;
    }
    let two_body = TwoBody::from_canonical(n, two.into_iter().map(|(k, (v, _))| (k, v)).collect());
    IntegralSet::new(
        nelec as usize,
        ms2,
        core.map(|c| c.0).unwrap_or(0.0),
        h,
        two_body,
    )
    .map_err(|e| perr(header_line, e.to_string()))
}

/// Print a value so that parsing it back gives the same bits.
fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0.0".to_string()
    } else {
        format!("{v:.17e}")
    }
}

/// Serialize to FCIDUMP text. Only canonical representatives with
/// `|value| > 1e-14` are written; the core-energy line is always present.
pub fn write_fcidump(s: &IntegralSet) -> String {
    let mut out = String::new();
    let n = s.n_orb;
    let _ = writeln!(out, "&FCI NORB={},NELEC={},MS2={},", n, s.n_elec, s.ms2);
    let _ = writeln!(out, " ORBSYM={}", "1,".repeat(n));
    let _ = writeln!(out, " ISYM=1,");
    let _ = writeln!(out, "&END");
    for (&[p, q, r, t], &v) in s.two_body.canonical() {
        if v.abs() > WRITE_THRESHOLD {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                format_value(v),
                p + 1,
                q + 1,
                r + 1,
                t + 1
            );
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let v = s.one_body[(p, q)];
            if v.abs() > WRITE_THRESHOLD {
                let _ = writeln!(out, "{} {} {} 0 0", format_value(v), p + 1, q + 1);
            }
        }
    }
    let _ = writeln!(out, "{} 0 0 0 0", format_value(s.core_energy));
    out
}

/// Project the Hamiltonian onto `subset` (kept in the given order).
///
/// With a frozen density, the density is first masked to the complement of
/// the subset; the one-body block is then dressed with its `J − ½K` field and
/// the frozen block's own energy is added to the core energy. The electron
/// count of the result is the original count minus the rounded frozen trace.
pub fn restrict_to_orbitals(
    s: &IntegralSet,
    subset: &[usize],
    frozen_density: Option<&DensityMatrix>,
) -> Result<IntegralSet> {
    if subset.is_empty() {
        return Err(Error::InvalidInput("empty orbital subset".into()));
    }
    let n = s.n_orb;
    let mut seen = vec![false; n];
    for &p in subset {
        if p >= n {
            return Err(Error::InvalidInput(format!("orbital {p} out of range")));
        }
        if seen[p] {
            return Err(Error::InvalidInput(format!("orbital {p} repeated in subset")));
        }
        seen[p] = true;
    }
    let m = subset.len();
    let mut h = DMatrix::from_fn(m, m, |a, b| s.one_body[(subset[a], subset[b])]);
    let mut core = s.core_energy;
    let mut n_elec = s.n_elec as i64;
    if let Some(d) = frozen_density {
        if d.values.nrows() != n {
            return Err(Error::Dimension {
                expected: n,
                found: d.values.nrows(),
            });
        }
        let mut df = d.values.clone();
        for p in 0..n {
            for q in 0..n {
                if seen[p] || seen[q] {
                    df[(p, q)] = 0.0;
                }
            }
        }
        let g = s.two_electron_field(&df);
        for a in 0..m {
            for b in 0..m {
                h[(a, b)] += g[(subset[a], subset[b])];
            }
        }
        core += df.component_mul(&(&s.one_body + &g * 0.5)).sum();
        n_elec -= df.trace().round() as i64;
    }
    let n_elec = n_elec.clamp(0, 2 * m as i64) as usize;
    let two = TwoBody::from_dense(&s.two_body.dense().restrict(subset));
    IntegralSet::new(n_elec, (n_elec % 2) as i32, core, h, two)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_example() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0\n&END\n0.5 1 1 1 1\n-1.1 1 1 0 0\n0.7 0 0 0 0\n";
        let s = parse_fcidump(text).unwrap();
        assert_eq!(s.n_orb, 2);
        assert_eq!(s.n_elec, 2);
        assert_eq!(s.eri(0, 0, 0, 0), 0.5);
        assert_eq!(s.one_body[(0, 0)], -1.1);
        assert_eq!(s.core_energy, 0.7);
    }

    #[test]
    fn empty_body_gives_zero_integrals() {
        let s = parse_fcidump("&FCI NORB=3,NELEC=2,MS2=0,\n/\n").unwrap();
        assert_eq!(s.core_energy, 0.0);
        assert_eq!(s.one_body, DMatrix::zeros(3, 3));
        assert_eq!(s.two_body.canonical().count(), 0);
    }

    #[test]
    fn symmetric_query() {
        let s = parse_fcidump("&FCI NORB=2,NELEC=2,MS2=0 &END\n0.3 1 2 1 2\n").unwrap();
        assert_eq!(s.eri(1, 0, 1, 0), 0.3);
        assert_eq!(s.eri(0, 1, 1, 0), 0.3);
    }

    #[test]
    fn header_spread_over_lines_with_orbsym() {
        let text = "&FCI NORB= 2,NELEC= 2,MS2=0,\n ORBSYM=1,1,\n ISYM=1,\n&END\n";
        let s = parse_fcidump(text).unwrap();
        assert_eq!((s.n_orb, s.n_elec, s.ms2), (2, 2, 0));
    }

    #[test]
    fn missing_norb_is_reported() {
        let err = parse_fcidump("&FCI NELEC=2 &END\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn index_out_of_range_reports_line() {
        let err = parse_fcidump("&FCI NORB=2,NELEC=2 &END\n0.1 1 1 0 0\n0.2 3 1 0 0\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn inconsistent_duplicate_rejected() {
        let err = parse_fcidump("&FCI NORB=2,NELEC=2 &END\n0.3 1 2 1 2\n0.4 2 1 2 1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        // consistent duplicates are fine
        parse_fcidump("&FCI NORB=2,NELEC=2 &END\n0.3 1 2 1 2\n0.3 2 1 2 1\n").unwrap();
    }

    #[test]
    fn zero_set_writes_core_line_only() {
        let s = parse_fcidump("&FCI NORB=2,NELEC=2 &END\n").unwrap();
        let text = write_fcidump(&s);
        let body: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("&END")).skip(1).collect();
        assert_eq!(body, vec!["0.0 0 0 0 0"]);
    }

    #[test]
    fn canonical_index_is_minimal_image() {
        assert_eq!(canonical_index(1, 0, 1, 0), [0, 1, 0, 1]);
        assert_eq!(canonical_index(2, 3, 0, 1), [0, 1, 2, 3]);
    }

    #[test]
    fn restrict_rejects_empty_and_repeated() {
        let s = parse_fcidump("&FCI NORB=2,NELEC=2 &END\n").unwrap();
        assert!(restrict_to_orbitals(&s, &[], None).is_err());
        assert!(restrict_to_orbitals(&s, &[0, 0], None).is_err());
    }
}
