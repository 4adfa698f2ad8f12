//! Named operators with string parameters, shared by the CLI and the service.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chunk::{
    run_local, run_two_pass, Chunk, ExecOptions, ExecutionReport, LocalOperator, MemoryBudget, OpProfile,
};
use crate::error::{Error, Result};
use crate::filters::{
    AnisotropicDiffusion, Conduction, EdgeKernel, FilterParams, Gaussian, Hessian, HessianComponent, Lbp2d, Mean, Median,
    NonLocalMeans, Unsharp,
};
use crate::morphology::{Morph, MorphOp, SmoothLabels, StructuringElement};
use crate::quantify::edt::{edt_chunked, EdtPlanar};
use crate::quantify::{ComponentApply, ComponentOp, Connectivity, KeyMode};
use crate::source::{RowStore, SlabSource};
use crate::threshold::{otsu_chunked, ApplyThreshold, LocalKind, LocalThreshold, LocalThresholdParams};
use crate::volume::{DType, Volume};
use crate::watershed::Watershed;

/// Where an operator input comes from, or where its output belongs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Intensity data.
    Volume,
    /// `uint32` labels.
    Labels,
}

impl Role {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "volume" => Ok(Role::Volume),
            "labels" => Ok(Role::Labels),
            other => Err(Error::param(format!("unknown target {other:?}, expected volume or labels"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

/// Catalog entry of a registered operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub inputs: &'static [Role],
    pub output: Role,
    pub params: &'static [ParamSpec],
}

const fn p(name: &'static str, default: &'static str, help: &'static str) -> ParamSpec {
    ParamSpec { name, default, help }
}

const SIGMA: ParamSpec = p("sigma", "1", "gaussian standard deviation in voxels");
const RADIUS: ParamSpec = p("radius", "1", "cubic window radius");
const SE: ParamSpec = p("se", "ball:1", "structuring element, kind:radius with kind box, ball or cross");
const MORPH: [ParamSpec; 3] = [SE, p("iterations", "1", "repeat count"), p("binary", "false", "binarize the input first")];
const CONN: ParamSpec = p("connectivity", "6", "6 or 26");

const V: &[Role] = &[Role::Volume];
const L: &[Role] = &[Role::Labels];

pub static CATALOG: &[OpInfo] = &[
    OpInfo { name: "identity", summary: "copy the input", inputs: V, output: Role::Volume, params: &[] },
    OpInfo { name: "gaussian", summary: "gaussian smoothing", inputs: V, output: Role::Volume, params: &[SIGMA] },
    OpInfo { name: "mean", summary: "box mean", inputs: V, output: Role::Volume, params: &[RADIUS] },
    OpInfo { name: "median", summary: "cubic median", inputs: V, output: Role::Volume, params: &[RADIUS] },
    OpInfo {
        name: "unsharp",
        summary: "unsharp masking",
        inputs: V,
        output: Role::Volume,
        params: &[SIGMA, p("amount", "1", "detail gain")],
    },
    OpInfo {
        name: "nlm",
        summary: "non-local means denoising",
        inputs: V,
        output: Role::Volume,
        params: &[
            p("h", "10", "filtering strength"),
            p("patch-radius", "1", "patch radius"),
            p("search-radius", "3", "search window radius"),
        ],
    },
    OpInfo {
        name: "diffusion",
        summary: "Perona-Malik anisotropic diffusion",
        inputs: V,
        output: Role::Volume,
        params: &[
            p("iterations", "5", "time steps"),
            p("kappa", "20", "edge threshold"),
            p("dt", "0.1", "step size, at most 1/6"),
            p("mode", "exp", "exp or rational conduction"),
        ],
    },
    OpInfo { name: "sobel", summary: "3D Sobel gradient magnitude", inputs: V, output: Role::Volume, params: &[] },
    OpInfo { name: "prewitt", summary: "3D Prewitt gradient magnitude", inputs: V, output: Role::Volume, params: &[] },
    OpInfo {
        name: "hessian",
        summary: "one hessian component at scale sigma",
        inputs: V,
        output: Role::Volume,
        params: &[SIGMA, p("component", "xx", "xx, yy, zz, xy, xz or yz")],
    },
    OpInfo { name: "lbp", summary: "per-slice 8-neighbour local binary pattern", inputs: V, output: Role::Volume, params: &[] },
    OpInfo {
        name: "threshold",
        summary: "foreground where value > t",
        inputs: V,
        output: Role::Labels,
        params: &[p("value", "0", "threshold t")],
    },
    OpInfo { name: "otsu", summary: "global Otsu threshold", inputs: V, output: Role::Labels, params: &[p("bins", "256", "histogram bins")] },
    OpInfo {
        name: "local-threshold",
        summary: "adaptive threshold over a cubic window",
        inputs: V,
        output: Role::Labels,
        params: &[
            p("method", "mean", "mean, median, gaussian, niblack or sauvola"),
            p("window", "7", "window radius"),
            p("k", "0.2", "niblack and sauvola weight"),
            p("r", "auto", "sauvola dynamic range"),
            p("c", "0", "offset for mean, median and gaussian"),
        ],
    },
    OpInfo { name: "erode", summary: "grayscale or binary erosion", inputs: V, output: Role::Volume, params: &MORPH },
    OpInfo { name: "dilate", summary: "grayscale or binary dilation", inputs: V, output: Role::Volume, params: &MORPH },
    OpInfo { name: "open", summary: "erosion then dilation", inputs: V, output: Role::Volume, params: &MORPH },
    OpInfo { name: "close", summary: "dilation then erosion", inputs: V, output: Role::Volume, params: &MORPH },
    OpInfo { name: "components", summary: "label connected foreground", inputs: V, output: Role::Labels, params: &[CONN] },
    OpInfo {
        name: "remove-islands",
        summary: "drop label components below a size",
        inputs: L,
        output: Role::Labels,
        params: &[p("min-size", "1", "smallest component kept, in voxels"), CONN],
    },
    OpInfo {
        name: "fill-holes",
        summary: "fill background enclosed by foreground",
        inputs: L,
        output: Role::Labels,
        params: &[CONN, p("fill", "1", "label written into holes")],
    },
    OpInfo {
        name: "reconstruct",
        summary: "foreground components of the volume touched by a label",
        inputs: &[Role::Volume, Role::Labels],
        output: Role::Labels,
        params: &[CONN],
    },
    OpInfo { name: "smooth-labels", summary: "per-label opening and closing", inputs: L, output: Role::Labels, params: &[SE] },
    OpInfo {
        name: "watershed",
        summary: "per-slice marker watershed; markers are the labels",
        inputs: &[Role::Volume, Role::Labels],
        output: Role::Labels,
        params: &[],
    },
    OpInfo { name: "edt", summary: "euclidean distance to the nearest zero label", inputs: L, output: Role::Volume, params: &[] },
];

pub fn info(name: &str) -> Result<&'static OpInfo> {
    CATALOG
        .iter()
        .find(|o| o.name == name)
        .ok_or_else(|| Error::param(format!("unknown operator {name:?}")))
}

/// Operator parameters as strings, from `k=v` pairs or a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params(pub BTreeMap<String, String>);

impl Params {
    pub fn parse_pairs<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for pair in pairs {
            let (k, v) = pair
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::param(format!("parameter {:?} is not key=value", pair.as_ref())))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Params(map))
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = match value {
            serde_json::Value::Null => return Ok(Params::default()),
            serde_json::Value::Object(o) => o,
            _ => return Err(Error::param("params must be an object")),
        };
        let mut map = BTreeMap::new();
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => return Err(Error::param(format!("parameter {k} has unsupported value {other}"))),
            };
            map.insert(k.clone(), s);
        }
        Ok(Params(map))
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    fn raw<'a>(&'a self, schema: &'a [ParamSpec], key: &str) -> &'a str {
        self.0
            .get(key)
            .map(String::as_str)
            .or_else(|| schema.iter().find(|p| p.name == key).map(|p| p.default))
            .unwrap_or("")
    }

    fn get<T: std::str::FromStr>(&self, schema: &[ParamSpec], key: &str) -> Result<T> {
        let raw = self.raw(schema, key);
        raw.parse()
            .map_err(|_| Error::param(format!("parameter {key}={raw:?} is not a valid {}", std::any::type_name::<T>())))
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Identity;

impl LocalOperator for Identity {
    fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        Ok(OpProfile::local(0, 2.0, inputs[0]))
    }
    fn apply(&self, chunk: &Chunk<'_>) -> Result<Volume> {
        Ok(chunk.primary().clone())
    }
}

enum Exec {
    Local(Box<dyn LocalOperator>),
    Components(ComponentOp),
    Otsu { bins: usize },
    Edt,
}

/// A configured operator ready to run.
pub struct Operator {
    pub info: &'static OpInfo,
    pub params: Params,
    exec: Exec,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator({} {})", self.info.name, self.params)
    }
}

fn filter_params(schema: &[ParamSpec], params: &Params) -> Result<FilterParams> {
    let d = FilterParams::default();
    let has = |k: &str| schema.iter().any(|p| p.name == k);
    let fp = FilterParams {
        sigma: if has("sigma") { params.get(schema, "sigma")? } else { d.sigma },
        radius: if has("radius") { params.get(schema, "radius")? } else { d.radius },
        amount: if has("amount") { params.get(schema, "amount")? } else { d.amount },
        kappa: if has("kappa") { params.get(schema, "kappa")? } else { d.kappa },
        dt: if has("dt") { params.get(schema, "dt")? } else { d.dt },
        iterations: if has("iterations") { params.get(schema, "iterations")? } else { d.iterations },
        h: if has("h") { params.get(schema, "h")? } else { d.h },
        patch_radius: if has("patch-radius") { params.get(schema, "patch-radius")? } else { d.patch_radius },
        search_radius: if has("search-radius") { params.get(schema, "search-radius")? } else { d.search_radius },
        mode: if has("mode") { Conduction::parse(params.raw(schema, "mode"))? } else { d.mode },
    };
    fp.validate()?;
    Ok(fp)
}

fn connectivity(schema: &[ParamSpec], params: &Params) -> Result<Connectivity> {
    Connectivity::parse(params.raw(schema, "connectivity"))
}

fn morph(op: MorphOp, schema: &[ParamSpec], params: &Params) -> Result<Exec> {
    let iterations: usize = params.get(schema, "iterations")?;
    if iterations == 0 {
        return Err(Error::param("iterations must be at least 1"));
    }
    Ok(Exec::Local(Box::new(Morph {
        op,
        se: StructuringElement::parse(params.raw(schema, "se"))?,
        iterations,
        binary: params.get(schema, "binary")?,
    })))
}

/// Looks up `name` and validates `params` against its parameter list.
pub fn build(name: &str, params: &Params) -> Result<Operator> {
    let info = info(name)?;
    let schema = info.params;
    if let Some(k) = params.0.keys().find(|k| !schema.iter().any(|p| p.name == k.as_str())) {
        let known: Vec<&str> = schema.iter().map(|p| p.name).collect();
        return Err(Error::param(format!("{name} has no parameter {k:?} (known: {})", known.join(", "))));
    }
    let local = |op: Box<dyn LocalOperator>| Ok::<_, Error>(Exec::Local(op));
    let exec = match name {
        "identity" => local(Box::new(Identity))?,
        "gaussian" => local(Box::new(Gaussian { sigma: filter_params(schema, params)?.sigma }))?,
        "mean" => local(Box::new(Mean { radius: filter_params(schema, params)?.radius }))?,
        "median" => local(Box::new(Median { radius: filter_params(schema, params)?.radius }))?,
        "unsharp" => {
            let fp = filter_params(schema, params)?;
            local(Box::new(Unsharp { sigma: fp.sigma, amount: fp.amount }))?
        }
        "nlm" => {
            let fp = filter_params(schema, params)?;
            local(Box::new(NonLocalMeans {
                patch_radius: fp.patch_radius,
                search_radius: fp.search_radius,
                ..NonLocalMeans::new(fp.h)
            }))?
        }
        "diffusion" => {
            let fp = filter_params(schema, params)?;
            local(Box::new(AnisotropicDiffusion { iterations: fp.iterations, kappa: fp.kappa, dt: fp.dt, mode: fp.mode }))?
        }
        "sobel" => local(Box::new(EdgeKernel::Sobel))?,
        "prewitt" => local(Box::new(EdgeKernel::Prewitt))?,
        "hessian" => {
            let sigma = filter_params(schema, params)?.sigma;
            local(Box::new(Hessian { sigma, component: HessianComponent::parse(params.raw(schema, "component"))? }))?
        }
        "lbp" => local(Box::new(Lbp2d))?,
        "threshold" => {
            let threshold: f64 = params.get(schema, "value")?;
            if !threshold.is_finite() {
                return Err(Error::param("threshold value must be finite"));
            }
            local(Box::new(ApplyThreshold { threshold }))?
        }
        "otsu" => {
            let bins: usize = params.get(schema, "bins")?;
            if bins < 2 {
                return Err(Error::param("otsu needs at least 2 bins"));
            }
            Exec::Otsu { bins }
        }
        "local-threshold" => {
            let r = match params.raw(schema, "r") {
                "auto" => None,
                _ => Some(params.get(schema, "r")?),
            };
            let lp = LocalThresholdParams {
                kind: LocalKind::parse(params.raw(schema, "method"))?,
                window: params.get(schema, "window")?,
                k: params.get(schema, "k")?,
                r,
                c: params.get(schema, "c")?,
            };
            lp.validate()?;
            local(Box::new(LocalThreshold(lp)))?
        }
        "erode" => morph(MorphOp::Erode, schema, params)?,
        "dilate" => morph(MorphOp::Dilate, schema, params)?,
        "open" => morph(MorphOp::Open, schema, params)?,
        "close" => morph(MorphOp::Close, schema, params)?,
        "components" => Exec::Components(ComponentOp {
            mode: KeyMode::Foreground,
            connectivity: connectivity(schema, params)?,
            apply: ComponentApply::Label,
        }),
        "remove-islands" => Exec::Components(ComponentOp {
            mode: KeyMode::SameLabel,
            connectivity: connectivity(schema, params)?,
            apply: ComponentApply::RemoveIslands { min_size: params.get(schema, "min-size")? },
        }),
        "fill-holes" => {
            let fill: u32 = params.get(schema, "fill")?;
            if fill == 0 {
                return Err(Error::param("fill label must be non-zero"));
            }
            Exec::Components(ComponentOp {
                mode: KeyMode::Background,
                connectivity: connectivity(schema, params)?,
                apply: ComponentApply::FillEnclosed { fill },
            })
        }
        "reconstruct" => Exec::Components(ComponentOp {
            mode: KeyMode::Foreground,
            connectivity: connectivity(schema, params)?,
            apply: ComponentApply::KeepMarked,
        }),
        "smooth-labels" => local(Box::new(SmoothLabels { se: StructuringElement::parse(params.raw(schema, "se"))? }))?,
        "watershed" => local(Box::new(Watershed))?,
        "edt" => Exec::Edt,
        other => unreachable!("{other} is in the catalog but has no builder"),
    };
    Ok(Operator { info, params: params.clone(), exec })
}

impl Operator {
    pub fn name(&self) -> &'static str {
        self.info.name
    }

    /// Profile used for chunk planning.
    pub fn profile(&self, inputs: &[DType]) -> Result<OpProfile> {
        if inputs.len() != self.info.inputs.len() {
            return Err(Error::param(format!(
                "{} takes {} input(s), got {}",
                self.info.name,
                self.info.inputs.len(),
                inputs.len()
            )));
        }
        for (i, (&d, role)) in inputs.iter().zip(self.info.inputs).enumerate() {
            if *role == Role::Labels && d != DType::U32 {
                return Err(Error::param(format!("{} input {i} must be uint32 labels, got {d}", self.info.name)));
            }
        }
        match &self.exec {
            Exec::Local(op) => op.profile(inputs),
            Exec::Components(op) => crate::chunk::ChunkReduce::profile(op, inputs),
            Exec::Otsu { .. } => Ok(OpProfile::two_pass(0, crate::filters::scratch(inputs, 4), DType::U32)),
            Exec::Edt => EdtPlanar.profile(inputs),
        }
    }

    pub fn out_dtype(&self, inputs: &[DType]) -> Result<DType> {
        Ok(self.profile(inputs)?.out_dtype)
    }

    /// Runs chunk by chunk from `inputs` into `out`, which must already have
    /// the input shape and [`out_dtype`](Self::out_dtype).
    pub fn run(
        &self,
        inputs: &[&dyn SlabSource],
        out: &mut dyn RowStore,
        budget: &MemoryBudget,
        opts: &ExecOptions<'_>,
    ) -> Result<ExecutionReport> {
        let dtypes: Vec<DType> = inputs.iter().map(|s| s.dtype()).collect();
        self.profile(&dtypes)?;
        match &self.exec {
            Exec::Local(op) => run_local(inputs, op.as_ref(), out, budget, opts),
            Exec::Components(op) => run_two_pass(inputs, op, out, budget, opts).map(|(_, r)| r),
            Exec::Otsu { bins } => otsu_chunked(inputs[0], *bins, out, budget, opts).map(|(_, r)| r),
            Exec::Edt => edt_chunked(inputs[0], out, budget, opts),
        }
    }

    /// In-memory run; allocates the output volume.
    pub fn run_volumes(&self, inputs: &[&Volume], budget: &MemoryBudget, opts: &ExecOptions<'_>) -> Result<(Volume, ExecutionReport)> {
        let first = inputs.first().ok_or_else(|| Error::param("operator needs at least one input"))?;
        let dtypes: Vec<DType> = inputs.iter().map(|v| v.dtype()).collect();
        let mut out = Volume::zeros(first.shape(), self.out_dtype(&dtypes)?).with_spacing(first.spacing())?;
        let sources: Vec<&dyn SlabSource> = inputs.iter().map(|v| *v as &dyn SlabSource).collect();
        let report = self.run(&sources, &mut out, budget, opts)?;
        Ok((out, report))
    }
}
