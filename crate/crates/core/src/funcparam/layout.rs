use serde::{Deserialize, Serialize};

use super::{FuncParamError, GpMeanFunction};

/// Map from the unconstrained coordinate to the raw parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    /// Raw value is `exp` of the coordinate; keeps positive parameters positive.
    Log,
}

impl Transform {
    pub fn to_raw(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Log => u.exp(),
        }
    }

    pub fn to_unconstrained(self, raw: f64) -> f64 {
        match self {
            Transform::Identity => raw,
            Transform::Log => raw.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSlice {
    pub name: String,
    pub len: usize,
    pub transform: Transform,
}

/// Named, contiguous slices of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterLayout {
    pub slices: Vec<ParamSlice>,
}

/// Raw (constrained) parameter values by slice name, in layout order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterValues {
    pub entries: Vec<(String, Vec<f64>)>,
}

impl ParameterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scalar(mut self, name: &str, transform: Transform) -> Self {
        self.slices.push(ParamSlice {
            name: name.to_string(),
            len: 1,
            transform,
        });
        self
    }

    pub fn vector(mut self, name: &str, len: usize, transform: Transform) -> Self {
        self.slices.push(ParamSlice {
            name: name.to_string(),
            len,
            transform,
        });
        self
    }

    /// Node values plus log-transformed observation error, amplitude and
    /// length scale of a GP mean function, under `prefix.*` names.
    pub fn gp(self, prefix: &str, n_nodes: usize) -> Self {
        self.vector(&format!("{prefix}.values"), n_nodes, Transform::Identity)
            .scalar(&format!("{prefix}.obs_error"), Transform::Log)
            .scalar(&format!("{prefix}.amplitude"), Transform::Log)
            .scalar(&format!("{prefix}.length_scale"), Transform::Log)
    }

    /// Length of the flat vector.
    pub fn dim(&self) -> usize {
        self.slices.iter().map(|s| s.len).sum()
    }

    /// Name of each flat coordinate, with `[k]` suffixes on vector slices.
    pub fn coordinate_names(&self) -> Vec<String> {
        self.slices
            .iter()
            .flat_map(|s| {
                (0..s.len).map(move |k| if s.len == 1 { s.name.clone() } else { format!("{}[{k}]", s.name) })
            })
            .collect()
    }

    /// Transform applied to each flat coordinate.
    pub fn coordinate_transforms(&self) -> Vec<Transform> {
        self.slices.iter().flat_map(|s| std::iter::repeat_n(s.transform, s.len)).collect()
    }

    /// Flat unconstrained vector to raw named values.
    pub fn unpack(&self, v: &[f64]) -> Result<ParameterValues, FuncParamError> {
        if v.len() != self.dim() {
            return Err(FuncParamError::LayoutMismatch(format!(
                "vector of length {} for layout of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let mut offset = 0;
        let entries = self
            .slices
            .iter()
            .map(|s| {
                let vals = v[offset..offset + s.len].iter().map(|&u| s.transform.to_raw(u)).collect();
                offset += s.len;
                (s.name.clone(), vals)
            })
            .collect();
        Ok(ParameterValues { entries })
    }

    /// Raw named values to the flat unconstrained vector.
    pub fn pack(&self, values: &ParameterValues) -> Result<Vec<f64>, FuncParamError> {
        if values.entries.len() != self.slices.len() {
            return Err(FuncParamError::LayoutMismatch(format!(
                "{} groups for a layout of {}",
                values.entries.len(),
                self.slices.len()
            )));
        }
        let mut out = Vec::with_capacity(self.dim());
        for s in &self.slices {
            let raw = values
                .get(&s.name)
                .ok_or_else(|| FuncParamError::LayoutMismatch(format!("missing `{}`", s.name)))?;
            if raw.len() != s.len {
                return Err(FuncParamError::LayoutMismatch(format!(
                    "`{}` has {} values, expected {}",
                    s.name,
                    raw.len(),
                    s.len
                )));
            }
            if s.transform == Transform::Log && raw.iter().any(|&r| !(r > 0.0)) {
                return Err(FuncParamError::LayoutMismatch(format!("`{}` must be positive", s.name)));
            }
            out.extend(raw.iter().map(|&r| s.transform.to_unconstrained(r)));
        }
        Ok(out)
    }
}

impl ParameterValues {
    pub fn insert(&mut self, name: &str, values: Vec<f64>) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.entries.push((name.to_string(), values)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64], FuncParamError> {
        self.get(name)
            .ok_or_else(|| FuncParamError::LayoutMismatch(format!("missing `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64, FuncParamError> {
        match self.require(name)? {
            [v] => Ok(*v),
            other => Err(FuncParamError::LayoutMismatch(format!(
                "`{name}` has {} values, expected 1",
                other.len()
            ))),
        }
    }

    /// The GP mean function stored under `prefix.*` on the given scalar nodes.
    pub fn gp(&self, prefix: &str, nodes: &[f64]) -> Result<GpMeanFunction, FuncParamError> {
        let values = self.require(&format!("{prefix}.values"))?.to_vec();
        if values.len() != nodes.len() {
            return Err(FuncParamError::LayoutMismatch(format!(
                "`{prefix}` has {} values for {} nodes",
                values.len(),
                nodes.len()
            )));
        }
        GpMeanFunction::scalar(
            nodes,
            values,
            self.scalar(&format!("{prefix}.obs_error"))?,
            self.scalar(&format!("{prefix}.amplitude"))?,
            self.scalar(&format!("{prefix}.length_scale"))?,
        )
    }

    /// Store a GP's node values and hyperparameters under `prefix.*`.
    pub fn insert_gp(&mut self, prefix: &str, gp: &GpMeanFunction) {
        self.insert(&format!("{prefix}.values"), gp.node_values.clone());
        self.insert(&format!("{prefix}.obs_error"), vec![gp.obs_error]);
        self.insert(&format!("{prefix}.amplitude"), vec![gp.amplitude]);
        self.insert(&format!("{prefix}.length_scale"), vec![gp.length_scale]);
    }
}
