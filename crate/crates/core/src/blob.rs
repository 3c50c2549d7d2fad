//! Binary serialization of dense target maps.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  b"QTGT"
//! u32    version (1)
//! u32    level count
//! per level:
//!   u32  level id, u32 stride, u32 height, u32 width
//!   f32  labels[height*width]        1 positive, 0 negative, -1 ignore
//!   f32  reg[height*width*8]         zero off the positives
//!   f32  matched[height*width]       ground-truth index, -1 if none
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::targets::{Label, LevelTargets};

pub const MAGIC: &[u8; 4] = b"QTGT";
pub const VERSION: u32 = 1;

pub fn encode_targets<T: Scalar>(maps: &[LevelTargets<T>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(maps.len() as u32).to_le_bytes());
    let f32s = |out: &mut Vec<u8>, v: f32| out.extend_from_slice(&v.to_le_bytes());
    for m in maps {
        for v in [m.level.level as u32, m.level.stride, m.height as u32, m.width as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &m.labels {
            f32s(&mut out, f32::from(l.code()));
        }
        for r in &m.reg {
            f32s(&mut out, r.to_f32().unwrap_or(f32::NAN));
        }
        for g in &m.matched {
            f32s(&mut out, g.map_or(-1.0, |i| i as f32));
        }
    }
    out
}

/// One level read back from a blob. Scale ranges are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLevel {
    pub level: u8,
    pub stride: u32,
    pub height: usize,
    pub width: usize,
    pub labels: Vec<Label>,
    pub reg: Vec<f32>,
    pub matched: Vec<Option<usize>>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Parse { line: 0, msg: format!("blob truncated at byte {}", self.pos) });
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Parse { line: 0, msg: "blob too large".into() })?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode_targets(buf: &[u8]) -> Result<Vec<DecodedLevel>> {
    let bad = |msg: String| Error::Parse { line: 0, msg };
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(bad("not a target blob".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported blob version {version}")));
    }
    let count = r.u32()?;
    let mut levels = Vec::new();
    for _ in 0..count {
        let (level, stride, height, width) = (r.u32()?, r.u32()?, r.u32()? as usize, r.u32()? as usize);
        let n = height * width;
        let labels = r
            .f32s(n)?
            .into_iter()
            .map(|v| match v as i32 {
                1 => Ok(Label::Positive),
                0 => Ok(Label::Negative),
                -1 => Ok(Label::Ignore),
                _ => Err(bad(format!("bad label {v}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let reg = r.f32s(n * 8)?;
        let matched = r.f32s(n)?.into_iter().map(|v| (v >= 0.0).then_some(v as usize)).collect();
        levels.push(DecodedLevel {
            level: u8::try_from(level).map_err(|_| bad(format!("bad level {level}")))?,
            stride,
            height,
            width,
            labels,
            reg,
            matched,
        });
    }
    if r.pos != buf.len() {
        return Err(bad(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(levels)
}

/// Per-level counts of positive, negative and ignored bins.
pub fn summarize<T: Scalar>(maps: &[LevelTargets<T>]) -> String {
    let mut s = String::from("level,stride,height,width,positive,negative,ignore,texts\n");
    for m in maps {
        let mut texts: Vec<usize> = m.matched.iter().flatten().copied().collect();
        texts.sort_unstable();
        texts.dedup();
        let _ = writeln!(
            s,
            "P{},{},{},{},{},{},{},{}",
            m.level.level,
            m.level.stride,
            m.height,
            m.width,
            m.count(Label::Positive),
            m.count(Label::Negative),
            m.count(Label::Ignore),
            texts.len()
        );
    }
    s
}
