//! Interpreter params on disk, next to the library file of the same phase.
//!
//! Layout: magic `NTPP`, u32 version, u32 entry count, then per entry a u32
//! body length, the body and the CRC32 of the body. A body holds the task
//! id, the networks the task's model was built with and its logits.

use std::path::Path;

use ntpt_engine::Tensor;

use crate::binio::{write_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::model_2x2::NetRef;
use crate::tasks::TaskId;
use crate::terpret::{ModelGraph, ProgramParams};

const MAGIC: &[u8; 4] = b"NTPP";
pub const PROGRAMS_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct StoredProgram {
    pub task: TaskId,
    pub nets: Vec<NetRef>,
    pub names: Vec<String>,
    pub logits: Vec<Tensor>,
}

impl StoredProgram {
    pub fn new(task: TaskId, nets: &[NetRef], params: &ProgramParams) -> Self {
        StoredProgram { task, nets: nets.to_vec(), names: params.names().to_vec(), logits: params.logits().to_vec() }
    }

    /// Params for `graph`, which must declare the same params in order.
    pub fn params_for(&self, graph: &ModelGraph) -> Result<ProgramParams> {
        let p = ProgramParams::from_parts(graph, self.logits.clone())?;
        if p.names() != self.names.as_slice() {
            return Err(Error::Listing(format!("stored params of `{}` do not match model `{}`", self.task, graph.name())));
        }
        Ok(p)
    }
}

pub fn programs_to_bytes(programs: &[StoredProgram]) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MAGIC);
    w.u32(PROGRAMS_VERSION);
    w.len(programs.len());
    for p in programs {
        let mut b = Writer::default();
        b.str(&p.task.to_string());
        b.len(p.nets.len());
        for n in &p.nets {
            b.str(&n.name);
            b.len(n.classes);
        }
        b.len(p.logits.len());
        for (name, t) in p.names.iter().zip(&p.logits) {
            b.str(name);
            b.tensor(t);
        }
        w.len(b.buf.len());
        w.buf.extend_from_slice(&b.buf);
        w.u32(crc32fast::hash(&b.buf));
    }
    w.buf
}

pub fn programs_from_bytes(bytes: &[u8], path: &Path) -> Result<Vec<StoredProgram>> {
    let mut r = Reader::new(bytes, path);
    if r.bytes(4)? != MAGIC {
        return Err(r.fail("not a program file (bad magic)"));
    }
    let version = r.u32()?;
    if version != PROGRAMS_VERSION {
        return Err(r.fail(format!("unsupported version {version}, expected {PROGRAMS_VERSION}")));
    }
    let count = r.len()?;
    let mut out = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = r.len()?;
        let start = r.pos;
        let body = r.bytes(len)?;
        if crc32fast::hash(body) != r.u32()? {
            r.pos = start;
            return Err(r.fail("checksum mismatch"));
        }
        let mut b = Reader::new(body, path);
        let task: TaskId = b.str()?.parse().map_err(|e: Error| r.fail(e.to_string()))?;
        let nets = (0..b.len()?)
            .map(|_| Ok(NetRef { name: b.str()?, classes: b.len()? }))
            .collect::<Result<Vec<_>>>()?;
        let n = b.len()?;
        let (mut names, mut logits) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            names.push(b.str()?);
            logits.push(b.tensor()?);
        }
        if !b.done() {
            return Err(r.fail(format!("trailing bytes in `{task}`")));
        }
        out.push(StoredProgram { task, nets, names, logits });
    }
    if !r.done() {
        return Err(r.fail("trailing bytes"));
    }
    Ok(out)
}

pub fn save_programs(path: &Path, programs: &[StoredProgram]) -> Result<()> {
    write_file(path, &programs_to_bytes(programs))
}

pub fn load_programs(path: &Path) -> Result<Vec<StoredProgram>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    programs_from_bytes(&bytes, path)
}
