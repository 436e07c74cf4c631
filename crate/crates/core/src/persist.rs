//! Versioned little-endian binary container for Nyström and trained models.
//!
//! Layout: magic `SPAM`, `u32` format version, `u8` payload kind, payload.
//! Matrices are `u64 rows, u64 cols` followed by column-major `f64`s; sparse
//! rows are `u64 nnz`, the `u32` indices, then the `f64` values.

use std::io::{Read, Write};
use std::sync::Arc;

use faer::Mat;

use crate::data::SparseVec;
use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, KernelKind};
use crate::machines::{Approach, Loss, SolverConfig, TrainedModel};
use crate::nystrom::NystromModel;
use crate::sampling::{LandmarkSet, Landmarks, Strategy};

pub const MAGIC: [u8; 4] = *b"SPAM";
pub const FORMAT_VERSION: u32 = 1;

const MAX_LEN: u64 = 1 << 32;

const KIND_NYSTROM: u8 = 0;
const KIND_TRAINED: u8 = 1;

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.out.write_all(&[v])?)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }
    fn usize(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }
    fn mat(&mut self, m: &Mat<f64>) -> Result<()> {
        self.usize(m.nrows())?;
        self.usize(m.ncols())?;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                self.f64(m[(i, j)])?;
            }
        }
        Ok(())
    }
    fn opt_mat(&mut self, m: Option<&Mat<f64>>) -> Result<()> {
        match m {
            None => self.u8(0),
            Some(m) => {
                self.u8(1)?;
                self.mat(m)
            }
        }
    }
    fn sparse(&mut self, v: &SparseVec) -> Result<()> {
        self.usize(v.nnz())?;
        for &i in v.indices() {
            self.u32(i)?;
        }
        for &x in v.values() {
            self.f64(x)?;
        }
        Ok(())
    }
    fn rows(&mut self, rows: &[SparseVec]) -> Result<()> {
        self.usize(rows.len())?;
        rows.iter().try_for_each(|r| self.sparse(r))
    }
}

struct Reader<R: Read> {
    inp: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inp
            .read_exact(&mut buf)
            .map_err(|e| fmt_err(format!("truncated model file: {e}")))?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| fmt_err("length overflows usize"))
    }
    /// Lengths are bounded so a corrupt header cannot request huge buffers.
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(fmt_err(format!("implausible length {n}")));
        }
        usize::try_from(n).map_err(|_| fmt_err("length overflows usize"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn mat(&mut self) -> Result<Mat<f64>> {
        let (r, c) = (self.len()?, self.len()?);
        if (r as u64).checked_mul(c as u64).map_or(true, |t| t > MAX_LEN) {
            return Err(fmt_err(format!("implausible matrix size {r}x{c}")));
        }
        let mut m = Mat::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }
    fn opt_mat(&mut self) -> Result<Option<Mat<f64>>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.mat()?)),
            t => Err(fmt_err(format!("bad option tag {t}"))),
        }
    }
    fn sparse(&mut self) -> Result<SparseVec> {
        let nnz = self.len()?;
        let idx = (0..nnz).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let val = (0..nnz).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        SparseVec::new(idx, val).map_err(|e| fmt_err(format!("bad sparse row: {e}")))
    }
    fn rows(&mut self) -> Result<Vec<SparseVec>> {
        let n = self.len()?;
        (0..n).map(|_| self.sparse()).collect()
    }
}

fn strategy_tag(s: Strategy) -> u8 {
    Strategy::ALL.iter().position(|&t| t == s).unwrap() as u8
}

fn write_nystrom<W: Write>(w: &mut Writer<W>, m: &NystromModel) -> Result<()> {
    match m.kernel.kind {
        KernelKind::Gaussian => w.u8(0)?,
    }
    w.f64(m.kernel.gamma)?;
    w.f64(m.rel_tol)?;
    w.u8(strategy_tag(m.landmarks.strategy))?;
    w.u64(m.landmarks.source_seed)?;
    match &m.landmarks.landmarks {
        Landmarks::Points { points, selection } => {
            w.u8(0)?;
            w.rows(points)?;
            match selection {
                None => w.u8(0)?,
                Some(sel) => {
                    w.u8(1)?;
                    w.usize(sel.len())?;
                    sel.iter().try_for_each(|&i| w.usize(i))?;
                }
            }
        }
        Landmarks::Combination { weights } => {
            w.u8(1)?;
            w.mat(weights)?;
        }
    }
    w.mat(&m.basis)?;
    w.mat(&m.features)?;
    w.mat(&m.k_mn)?;
    w.mat(&m.k_mm)?;
    match &m.train_rows {
        None => w.u8(0),
        Some(rows) => {
            w.u8(1)?;
            w.rows(rows)
        }
    }
}

fn read_nystrom<R: Read>(r: &mut Reader<R>) -> Result<NystromModel> {
    let kind = match r.u8()? {
        0 => KernelKind::Gaussian,
        t => return Err(fmt_err(format!("unknown kernel tag {t}"))),
    };
    let kernel = KernelConfig { kind, gamma: r.f64()? };
    let rel_tol = r.f64()?;
    let strategy = *Strategy::ALL
        .get(r.u8()? as usize)
        .ok_or_else(|| fmt_err("unknown strategy tag"))?;
    let source_seed = r.u64()?;
    let landmarks = match r.u8()? {
        0 => {
            let points = r.rows()?;
            let selection = match r.u8()? {
                0 => None,
                1 => {
                    let len = r.len()?;
                    Some((0..len).map(|_| r.usize()).collect::<Result<Vec<_>>>()?)
                }
                t => return Err(fmt_err(format!("bad option tag {t}"))),
            };
            Landmarks::Points { points, selection }
        }
        1 => Landmarks::Combination { weights: r.mat()? },
        t => return Err(fmt_err(format!("unknown landmark tag {t}"))),
    };
    let basis = r.mat()?;
    let features = r.mat()?;
    let k_mn = r.mat()?;
    let k_mm = r.mat()?;
    let train_rows = match r.u8()? {
        0 => None,
        1 => Some(r.rows()?),
        t => return Err(fmt_err(format!("bad option tag {t}"))),
    };
    if features.nrows() != basis.ncols() || k_mn.nrows() != basis.nrows() || k_mn.ncols() != features.ncols() {
        return Err(fmt_err("inconsistent model dimensions"));
    }
    Ok(NystromModel {
        landmarks: LandmarkSet {
            landmarks,
            strategy,
            source_seed,
        },
        kernel,
        rel_tol,
        basis,
        features,
        k_mn,
        k_mm,
        train_rows,
    })
}

fn header<W: Write>(w: &mut Writer<W>, kind: u8) -> Result<()> {
    w.out.write_all(&MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u8(kind)
}

fn check_header<R: Read>(r: &mut Reader<R>, kind: u8) -> Result<()> {
    if r.bytes::<4>()? != MAGIC {
        return Err(fmt_err("not a model file (bad magic)"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(fmt_err(format!("unsupported format version {version}")));
    }
    let got = r.u8()?;
    if got != kind {
        return Err(fmt_err(format!("expected payload kind {kind}, found {got}")));
    }
    Ok(())
}

pub fn write_nystrom_model<W: Write>(out: W, model: &NystromModel) -> Result<()> {
    let mut w = Writer { out };
    header(&mut w, KIND_NYSTROM)?;
    write_nystrom(&mut w, model)
}

pub fn read_nystrom_model<R: Read>(inp: R) -> Result<NystromModel> {
    let mut r = Reader { inp };
    check_header(&mut r, KIND_NYSTROM)?;
    read_nystrom(&mut r)
}

pub fn write_trained_model<W: Write>(out: W, model: &TrainedModel) -> Result<()> {
    let mut w = Writer { out };
    header(&mut w, KIND_TRAINED)?;
    w.u8(match model.approach {
        Approach::Gsa => 0,
        Approach::Lla => 1,
        Approach::Ncr => 2,
    })?;
    let s = &model.solver;
    w.u8(match s.loss {
        Loss::Squared => 0,
        Loss::Hinge => 1,
    })?;
    w.f64(s.lambda0)?;
    w.f64(s.svm_c)?;
    w.usize(s.max_iter)?;
    w.f64(s.tol)?;
    w.u64(s.seed)?;
    w.mat(&model.weights)?;
    w.opt_mat(model.alpha.as_ref())?;
    w.opt_mat(model.g_pinv.as_ref())?;
    write_nystrom(&mut w, &model.nystrom)
}

pub fn read_trained_model<R: Read>(inp: R) -> Result<TrainedModel> {
    let mut r = Reader { inp };
    check_header(&mut r, KIND_TRAINED)?;
    let approach = match r.u8()? {
        0 => Approach::Gsa,
        1 => Approach::Lla,
        2 => Approach::Ncr,
        t => return Err(fmt_err(format!("unknown approach tag {t}"))),
    };
    let loss = match r.u8()? {
        0 => Loss::Squared,
        1 => Loss::Hinge,
        t => return Err(fmt_err(format!("unknown loss tag {t}"))),
    };
    let solver = SolverConfig {
        loss,
        lambda0: r.f64()?,
        svm_c: r.f64()?,
        max_iter: r.usize()?,
        tol: r.f64()?,
        seed: r.u64()?,
    };
    let weights = r.mat()?;
    let alpha = r.opt_mat()?;
    let g_pinv = r.opt_mat()?;
    let nystrom = read_nystrom(&mut r)?;
    if weights.nrows() != nystrom.rank() {
        return Err(fmt_err("weights do not match the basis rank"));
    }
    Ok(TrainedModel {
        approach,
        nystrom: Arc::new(nystrom),
        solver,
        weights,
        alpha,
        g_pinv,
    })
}

pub fn trained_model_bytes(model: &TrainedModel) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trained_model(&mut buf, model).expect("writing to a Vec does not fail");
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_sparse_str;
    use crate::machines::train;
    use crate::numerics::DEFAULT_REL_TOL;
    use crate::sampling::{sample_gaussian_sketch, sample_uniform};
    use proptest::prelude::*;

    fn toy() -> crate::data::Dataset {
        parse_sparse_str(
            "0 1:0.1 2:1.0\n1 1:1.2 3:0.3\n0 2:0.9\n1 1:1.0 2:0.1 3:0.5\n0 1:-0.2 2:0.8\n1 1:0.9 3:0.1\n",
        )
        .unwrap()
    }

    #[test]
    fn trained_round_trip() {
        let ds = toy();
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let set = sample_uniform(&ds, 3, 4).unwrap();
        let m = train(&ds, cfg, set, None, &SolverConfig::ridge(0.5), Approach::Gsa, DEFAULT_REL_TOL).unwrap();
        let bytes = trained_model_bytes(&m);
        let back = read_trained_model(bytes.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn combination_round_trip_and_rejections() {
        let ds = toy();
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let k = crate::kernel::gram_sym(&ds.rows, &cfg);
        let set = sample_gaussian_sketch(ds.len(), 2, 1).unwrap();
        let m = NystromModel::build(&ds.rows, set, cfg, Some(k.as_ref()), DEFAULT_REL_TOL).unwrap();
        let mut buf = Vec::new();
        write_nystrom_model(&mut buf, &m).unwrap();
        assert_eq!(read_nystrom_model(buf.as_slice()).unwrap(), m);
        assert!(read_trained_model(buf.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_nystrom_model(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(read_nystrom_model(bad.as_slice()).is_err());
        assert!(read_nystrom_model(&buf[..buf.len() - 3]).is_err());
    }

    proptest! {
        #[test]
        fn nystrom_round_trip(values in proptest::collection::vec(-3.0f64..3.0, 12), gamma in 0.2f64..5.0, seed in 0u64..100) {
            let rows: Vec<SparseVec> = values.chunks(3).map(SparseVec::from_dense).collect();
            let text: String = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let feats: Vec<String> = r.indices().iter().zip(r.values()).map(|(j, v)| format!("{j}:{v:e}")).collect();
                    format!("{} {}\n", i % 2, feats.join(" "))
                })
                .collect();
            let ds = parse_sparse_str(&text).unwrap();
            let cfg = KernelConfig::gaussian(gamma).unwrap();
            let set = sample_uniform(&ds, 2, seed).unwrap();
            if let Ok(m) = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL) {
                let mut buf = Vec::new();
                write_nystrom_model(&mut buf, &m).unwrap();
                prop_assert_eq!(read_nystrom_model(buf.as_slice()).unwrap(), m);
            }
        }
    }
}
