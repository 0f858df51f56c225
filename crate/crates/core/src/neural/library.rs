use std::path::Path;

use indexmap::IndexMap;
use ntpt_engine::{Gradients, NodeId, ParamMut, Tape};
use rand::Rng;

use super::function::{InputSpec, NeuralFunction, NeuralFunctionSpec, OutputSpec};
use crate::binio::{write_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::terpret::{Batch, IntDomain, NeuralCall, Perception, TensorSlot};

const MAGIC: &[u8; 4] = b"NTPT";
pub const LIBRARY_VERSION: u32 = 1;

/// Named neural functions shared by every task model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Library {
    functions: IndexMap<String, NeuralFunction>,
}

impl Library {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a freshly initialized function.
    ///
    /// Fails if the name is taken, or if another function has not been
    /// trained yet: two untrained networks introduced together could swap
    /// roles, and nothing in the data would tell them apart.
    pub fn declare(
        &mut self,
        name: &str,
        spec: NeuralFunctionSpec,
        created_by: &str,
        rng: &mut impl Rng,
    ) -> Result<&NeuralFunction> {
        let mut f = NeuralFunction::init(name, spec, rng);
        f.created_by = created_by.to_string();
        self.insert(f)
    }

    /// Register an existing function under the same rules as [`Self::declare`].
    pub fn insert(&mut self, f: NeuralFunction) -> Result<&NeuralFunction> {
        if self.functions.contains_key(f.name()) {
            return Err(Error::Library(format!("function `{}` already exists", f.name())));
        }
        if let Some(untrained) = self.functions.values().find(|g| g.steps == 0) {
            return Err(Error::Library(format!(
                "cannot add `{}` while `{}` is still untrained: at most one new untrained network may be introduced per task, otherwise the networks' roles are not identifiable",
                f.name(),
                untrained.name()
            )));
        }
        let name = f.name().to_string();
        self.functions.insert(name.clone(), f);
        Ok(&self.functions[&name])
    }

    pub fn get(&self, name: &str) -> Option<&NeuralFunction> {
        self.functions.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut NeuralFunction> {
        self.functions.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> impl Iterator<Item = &NeuralFunction> {
        self.functions.values()
    }

    pub fn params_mut<'a>(&'a mut self, group: &'a str) -> impl Iterator<Item = ParamMut<'a>> + 'a {
        self.functions.values_mut().flat_map(move |f| f.params_mut(group))
    }

    /// Count one training step for every function with a gradient in `grads`.
    pub fn record_step(&mut self, grads: &Gradients) {
        for f in self.functions.values_mut() {
            if f.param_names().iter().any(|n| grads.get(n).is_some()) {
                f.steps += 1;
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(MAGIC);
        w.u32(LIBRARY_VERSION);
        w.len(self.functions.len());
        for f in self.functions.values() {
            let mut body = Writer::default();
            body.str(f.name());
            body.str(&f.created_by);
            body.u64(f.steps);
            write_spec(&mut body, f.spec());
            body.len(f.weights().len());
            for t in f.weights() {
                body.tensor(t);
            }
            w.len(body.buf.len());
            w.buf.extend_from_slice(&body.buf);
            w.u32(crc32fast::hash(&body.buf));
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        if r.bytes(4)? != MAGIC {
            return Err(r.fail("not a library file (bad magic)"));
        }
        let version = r.u32()?;
        if version != LIBRARY_VERSION {
            return Err(r.fail(format!("unsupported version {version}, expected {LIBRARY_VERSION}")));
        }
        let count = r.len()?;
        let mut functions = IndexMap::new();
        for _ in 0..count {
            let len = r.len()?;
            let start = r.pos;
            let body = r.bytes(len)?;
            let stored = r.u32()?;
            if crc32fast::hash(body) != stored {
                r.pos = start;
                return Err(r.fail("checksum mismatch"));
            }
            let mut b = Reader::new(body, path);
            let name = b.str()?;
            let created_by = b.str()?;
            let steps = b.u64()?;
            let spec = read_spec(&mut b)?;
            let n = b.len()?;
            let weights = (0..n).map(|_| b.tensor()).collect::<Result<Vec<_>>>()?;
            if !b.done() {
                return Err(r.fail(format!("trailing bytes in `{name}`")));
            }
            let mut f = NeuralFunction::from_weights(&name, spec, weights)
                .map_err(|e| Error::LibraryFile { path: path.to_path_buf(), reason: e.to_string() })?;
            f.steps = steps;
            f.created_by = created_by;
            functions.insert(name, f);
        }
        if !r.done() {
            return Err(r.fail("trailing bytes"));
        }
        Ok(Library { functions })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

fn write_spec(w: &mut Writer, spec: &NeuralFunctionSpec) {
    w.len(spec.inputs().len());
    for i in spec.inputs() {
        match i {
            InputSpec::Tensor(n) => {
                w.u8(0);
                w.len(*n);
            }
            InputSpec::Int(d) => {
                w.u8(1);
                w.len(d.size());
            }
        }
    }
    match spec.output() {
        OutputSpec::Int(d) => {
            w.u8(1);
            w.len(d.size());
        }
        OutputSpec::Tensor(n) => {
            w.u8(0);
            w.len(n);
        }
    }
    w.len(spec.hidden().len());
    for &h in spec.hidden() {
        w.len(h);
    }
}

fn read_spec(r: &mut Reader<'_>) -> Result<NeuralFunctionSpec> {
    let tagged = |r: &mut Reader<'_>| -> Result<(u8, usize)> { Ok((r.u8()?, r.len()?)) };
    let domain = |r: &Reader<'_>, n: usize| IntDomain::new(n).map_err(|_| r.fail("empty integer domain"));
    let n = r.len()?;
    let mut inputs = Vec::with_capacity(n.min(16));
    for _ in 0..n {
        inputs.push(match tagged(r)? {
            (0, w) => InputSpec::Tensor(w),
            (1, s) => InputSpec::Int(domain(r, s)?),
            (t, _) => return Err(r.fail(format!("unknown input tag {t}"))),
        });
    }
    let output = match tagged(r)? {
        (0, w) => OutputSpec::Tensor(w),
        (1, s) => OutputSpec::Int(domain(r, s)?),
        (t, _) => return Err(r.fail(format!("unknown output tag {t}"))),
    };
    let h = r.len()?;
    let hidden = (0..h).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
    NeuralFunctionSpec::new(inputs, output, hidden).map_err(|e| r.fail(e.to_string()))
}

/// Perception backed by the library's networks.
pub struct LibraryPerception<'a> {
    pub library: &'a Library,
}

impl LibraryPerception<'_> {
    fn function(&self, name: &str) -> Result<&NeuralFunction> {
        self.library.get(name).ok_or_else(|| Error::Library(format!("no function `{name}` in the library")))
    }
}

impl Perception for LibraryPerception<'_> {
    fn forward(&self, tape: &mut Tape, call: &NeuralCall<'_>) -> Result<NodeId> {
        let f = self.function(call.function)?;
        let mut inputs: Vec<NodeId> = call.tensors.iter().map(|&(_, id)| id).collect();
        inputs.extend(&call.ints);
        f.forward(tape, &inputs)
    }

    fn classify(
        &self,
        function: &str,
        tensors: &[TensorSlot],
        ints: &[usize],
        batch: &Batch,
        example: usize,
    ) -> Result<usize> {
        let f = self.function(function)?;
        let mut x = Vec::with_capacity(f.spec().input_width());
        for s in tensors {
            let t = batch.tensors.get(s.index()).ok_or_else(|| Error::Eval("missing tensor slot".into()))?;
            x.extend_from_slice(t.row_slice(example));
        }
        for (&v, spec) in ints.iter().zip(&f.spec().inputs()[tensors.len()..]) {
            let mut one_hot = vec![0.0; spec.width()];
            one_hot[v] = 1.0;
            x.extend(one_hot);
        }
        let n = x.len();
        Ok(f.classify(&ntpt_engine::Tensor::new([1, n], x)?)?[0])
    }
}
