//! File formats.
//!
//! Matrices are stored row-major as nested arrays of `[re, im]` pairs.
//! Outcome labels in files are 1-based.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dilation::{complete_isometry, NaimarkDilation};
use crate::error::{Error, Result};
use crate::generators::FiducialVector;
use crate::numerics::{c, isometry_error, CMatrix, C64, COMPLETENESS_TOL};
use crate::povm::{Povm, QuantumState};
use crate::scheme::{Partition, SchemeResult};

pub type MatrixData = Vec<Vec<[f64; 2]>>;

pub fn encode_matrix(m: &CMatrix) -> MatrixData {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn decode_matrix(data: &MatrixData) -> Result<CMatrix> {
    let rows = data.len();
    let cols = data.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || data.iter().any(|r| r.len() != cols) {
        return Err(Error::Format("matrix rows are empty or ragged".into()));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| c(data[i][j][0], data[i][j][1])))
}

fn decode_square(data: &MatrixData, dim: usize, what: &str) -> Result<CMatrix> {
    let m = decode_matrix(data)?;
    if m.shape() != (dim, dim) {
        return Err(Error::Format(format!("{what} has shape {:?}, expected {dim}x{dim}", m.shape())));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSection {
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub mix_probs: Vec<f64>,
    pub q_succ: f64,
    pub partition: Vec<Vec<usize>>,
}

impl SchemeSection {
    pub fn from_result(r: &SchemeResult) -> Self {
        SchemeSection {
            m: r.partition.m(),
            lambdas: r.lambdas.clone(),
            mix_probs: r.mix_probs.clone(),
            q_succ: r.q_succ,
            partition: r.partition.to_one_based(),
        }
    }

    pub fn partition(&self, n: usize) -> Result<Partition> {
        Partition::from_one_based(n, self.m.saturating_sub(1), self.partition.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmFile {
    pub dim: usize,
    pub outcomes: usize,
    pub effects: Vec<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// `n×n` unitary whose first `dim` rows generate the effects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_unitary: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSection>,
}

impl PovmFile {
    pub fn from_povm(povm: &Povm) -> Result<Self> {
        let generator_unitary = match povm.generator() {
            Some(frame) => Some(encode_matrix(&complete_isometry(&frame.adjoint())?.adjoint())),
            None => None,
        };
        Ok(PovmFile {
            dim: povm.dim(),
            outcomes: povm.outcomes(),
            effects: povm.effects().iter().map(encode_matrix).collect(),
            label: povm.label.clone(),
            generator_unitary,
            scheme: None,
        })
    }

    pub fn from_scheme(r: &SchemeResult) -> Result<Self> {
        let mut f = Self::from_povm(&r.target)?;
        f.scheme = Some(SchemeSection::from_result(r));
        Ok(f)
    }

    /// Decode and validate at the completeness tolerance.
    pub fn to_povm(&self) -> Result<Povm> {
        if self.effects.len() != self.outcomes {
            return Err(Error::Format(format!(
                "file declares {} outcomes but lists {} effects",
                self.outcomes,
                self.effects.len()
            )));
        }
        let effects = self
            .effects
            .iter()
            .enumerate()
            .map(|(i, e)| decode_square(e, self.dim, &format!("effect {}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let mut povm = Povm::new(effects)?;
        povm.label = self.label.clone();
        if let Some(g) = &self.generator_unitary {
            let u = decode_square(g, self.outcomes, "generator_unitary")?;
            let err = isometry_error(&u);
            if err > COMPLETENESS_TOL {
                return Err(Error::Validation(format!("generator_unitary is not unitary (error {err:.3e})")));
            }
            povm = povm.with_generator(u.rows(0, self.dim).into_owned())?;
        }
        Ok(povm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub dim: usize,
    pub rho: MatrixData,
}

impl StateFile {
    pub fn from_state(s: &QuantumState) -> Self {
        StateFile { dim: s.dim(), rho: encode_matrix(s.rho()) }
    }

    pub fn to_state(&self) -> Result<QuantumState> {
        QuantumState::new(decode_square(&self.rho, self.dim, "rho")?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationFile {
    pub dim: usize,
    pub big_dim: usize,
    pub natural_dim: usize,
    pub outcomes: usize,
    /// `big_dim × dim` isometry.
    pub isometry: MatrixData,
    /// Source outcome (1-based) of each basis projector.
    pub groups: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_unitary: Option<MatrixData>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DilationFile {
    pub fn from_dilation(d: &NaimarkDilation) -> Self {
        DilationFile {
            dim: d.dim(),
            big_dim: d.big_dim,
            natural_dim: d.natural_dim,
            outcomes: d.source.outcomes(),
            isometry: encode_matrix(&d.isometry),
            groups: d.groups.iter().map(|g| g + 1).collect(),
            completed_unitary: d.completed_unitary.as_ref().map(encode_matrix),
            warnings: d.warnings.clone(),
        }
    }

    /// Grouped projective law of the stored isometry on `state`.
    pub fn grouped_born(&self, state: &QuantumState) -> Result<Vec<f64>> {
        let v = decode_matrix(&self.isometry)?;
        if v.shape() != (self.big_dim, self.dim) || self.groups.len() != self.big_dim || state.dim() != self.dim {
            return Err(Error::Format("dilation file is inconsistent".into()));
        }
        let big = &v * state.rho() * v.adjoint();
        let mut p = vec![0.0; self.outcomes];
        for (k, &g) in self.groups.iter().enumerate() {
            if g == 0 || g > self.outcomes {
                return Err(Error::Format(format!("group label {g} out of range")));
            }
            p[g - 1] += big[(k, k)].re;
        }
        Ok(p)
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_povm(path: impl AsRef<Path>, povm: &Povm) -> Result<()> {
    write_json(path, &PovmFile::from_povm(povm)?)
}

pub fn load_povm(path: impl AsRef<Path>) -> Result<Povm> {
    read_json::<PovmFile>(path)?.to_povm()
}

pub fn save_state(path: impl AsRef<Path>, state: &QuantumState) -> Result<()> {
    write_json(path, &StateFile::from_state(state))
}

pub fn load_state(path: impl AsRef<Path>) -> Result<QuantumState> {
    read_json::<StateFile>(path)?.to_state()
}

pub fn save_partition(path: impl AsRef<Path>, p: &Partition) -> Result<()> {
    write_json(path, &p.to_one_based())
}

pub fn load_partition(path: impl AsRef<Path>, n: usize, m: usize) -> Result<Partition> {
    if m < 2 {
        return Err(Error::InvalidArgument("m must be at least 2".into()));
    }
    Partition::from_one_based(n, m - 1, read_json(path)?)
}

/// Line 1 is `d`, then `d` lines of `re im`.
pub fn parse_fiducial(text: &str) -> Result<FiducialVector> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let d: usize = lines
        .next()
        .ok_or_else(|| Error::Format("empty fiducial file".into()))?
        .parse()
        .map_err(|e| Error::Format(format!("bad dimension line: {e}")))?;
    let mut amps = Vec::with_capacity(d);
    for (k, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Format(format!("amplitude line {} needs two numbers", k + 1)));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(format!("amplitude line {}: {e}", k + 1)));
        amps.push(C64::new(parse(parts[0])?, parse(parts[1])?));
    }
    if amps.len() != d {
        return Err(Error::Format(format!("expected {d} amplitudes, found {}", amps.len())));
    }
    FiducialVector::normalized(amps)
}

pub fn load_fiducial(path: impl AsRef<Path>) -> Result<FiducialVector> {
    parse_fiducial(&fs::read_to_string(path)?)
}

/// Bundled SIC fiducials.
pub fn builtin_sic_fiducial(d: usize) -> Option<FiducialVector> {
    let text = match d {
        2 => include_str!("../data/fiducials/sic_d2.txt"),
        3 => include_str!("../data/fiducials/sic_d3.txt"),
        _ => return None,
    };
    parse_fiducial(text).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{haar_random_povm, sic_povm};
    use crate::numerics::max_abs_entry;
    use crate::partitions::standard_partition;
    use crate::povm::born;
    use crate::rng::Seed;
    use crate::scheme::build_scheme;

    #[test]
    fn povm_round_trip_keeps_generator() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let povm = haar_random_povm(3, 7, Seed(2)).unwrap();
        save_povm(&path, &povm).unwrap();
        let back = load_povm(&path).unwrap();
        assert_eq!(back.label, povm.label);
        for i in 0..7 {
            assert!(max_abs_entry(&(back.effect(i) - povm.effect(i))) < 1e-15);
        }
        assert!(max_abs_entry(&(back.generator().unwrap() - povm.generator().unwrap())) < 1e-15);
        let file: PovmFile = read_json(&path).unwrap();
        assert_eq!(file.generator_unitary.as_ref().unwrap().len(), 7);
    }

    #[test]
    fn invalid_files_are_rejected() {
        let mut f = PovmFile::from_povm(&Povm::computational_basis(2)).unwrap();
        f.effects[0][0][0] = [0.5, 0.0];
        assert!(matches!(f.to_povm(), Err(Error::Validation(_))));
        let mut f = PovmFile::from_povm(&Povm::computational_basis(2)).unwrap();
        f.outcomes = 3;
        assert!(matches!(f.to_povm(), Err(Error::Format(_))));
        let mut f = PovmFile::from_povm(&Povm::computational_basis(2)).unwrap();
        f.effects[1].pop();
        assert!(f.to_povm().is_err());
    }

    #[test]
    fn state_and_scheme_round_trip() {
        let s = QuantumState::random_mixed(3, &mut Seed(1).rng());
        let back = StateFile::from_state(&s).to_state().unwrap();
        assert!(max_abs_entry(&(back.rho() - s.rho())) < 1e-15);

        let target = haar_random_povm(3, 9, Seed(3)).unwrap();
        let r = build_scheme(&target, &standard_partition(9, 4).unwrap()).unwrap();
        let f = PovmFile::from_scheme(&r).unwrap();
        let sec = f.scheme.as_ref().unwrap();
        assert_eq!(sec.partition, vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]);
        assert_eq!(sec.partition(9).unwrap(), r.partition);
        let json = serde_json::to_string(&f).unwrap();
        let parsed: PovmFile = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, f);
    }

    #[test]
    fn fiducial_loading() {
        let sic2 = builtin_sic_fiducial(2).unwrap();
        assert!(sic_povm(2, &sic2).is_ok());
        let sic3 = builtin_sic_fiducial(3).unwrap();
        assert!(sic_povm(3, &sic3).is_ok());
        assert!(builtin_sic_fiducial(5).is_none());
        assert!(parse_fiducial("2\n1.0000005 0\n0 0\n").is_ok());
        assert!(parse_fiducial("2\n1.01 0\n0 0\n").is_err());
        assert!(parse_fiducial("3\n1 0\n0 0\n").is_err());
        assert!(parse_fiducial("2\n1 0\nx 0\n").is_err());
    }

    #[test]
    fn dilation_file_round_trip() {
        use crate::dilation::{naimark_dilate, DilationOptions};
        let sic = sic_povm(2, &builtin_sic_fiducial(2).unwrap()).unwrap();
        let dil = naimark_dilate(&sic, DilationOptions { pad_to: None, complete: true }).unwrap();
        let f = DilationFile::from_dilation(&dil);
        assert_eq!(f.big_dim, 4);
        let parsed: DilationFile = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        let mut rng = Seed(4).rng();
        for _ in 0..20 {
            let s = QuantumState::random_mixed(2, &mut rng);
            let p = born(&sic, &s).unwrap();
            let q = parsed.grouped_born(&s).unwrap();
            for i in 0..4 {
                assert!((p[i] - q[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn partition_file_is_one_based() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("part.json");
        let p = standard_partition(5, 3).unwrap();
        save_partition(&path, &p).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().split_whitespace().collect::<String>(), "[[1,2],[3,4],[5]]");
        assert_eq!(load_partition(&path, 5, 3).unwrap(), p);
    }
}
