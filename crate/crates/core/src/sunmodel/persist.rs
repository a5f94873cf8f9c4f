//! JSON model files.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::SunModel;
use crate::error::{Error, Result};
use crate::ingest::{io_err, ScalingParams};
use crate::scalar::Scalar;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DenseMatrix {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    data: Vec<f64>,
}

impl DenseMatrix {
    fn from_array<T: Scalar>(a: &Array2<T>) -> Self {
        DenseMatrix {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().map(|v| v.as_f64()).collect(),
        }
    }

    fn into_array<T: Scalar>(self, name: &str) -> Result<Array2<T>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.into_iter().map(T::lit).collect())
            .map_err(|e| Error::invalid(format!("model matrix {name}: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    alpha: f64,
    #[serde(rename = "J")]
    topics: usize,
    seed: u64,
    n_iters: usize,
    #[serde(rename = "W")]
    w: DenseMatrix,
    #[serde(rename = "H")]
    h: DenseMatrix,
    loss_trace: Vec<f64>,
    scaling_params: ScalingParams<f64>,
    normalized: bool,
    #[serde(default)]
    ids: Vec<String>,
}

fn cast_scaling<A: Scalar, B: Scalar>(p: &ScalingParams<A>) -> ScalingParams<B> {
    let conv = |v: &Vec<A>| v.iter().map(|x| B::lit(x.as_f64())).collect();
    ScalingParams {
        dim_means: conv(&p.dim_means),
        dim_stds: conv(&p.dim_stds),
        embedding_divisor: B::lit(p.embedding_divisor.as_f64()),
        response_mean: B::lit(p.response_mean.as_f64()),
        response_std: B::lit(p.response_std.as_f64()),
    }
}

/// Serialize a model. Floats use the shortest representation that parses
/// back to the identical value.
pub fn model_to_json<T: Scalar>(model: &SunModel<T>) -> String {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        alpha: model.alpha.as_f64(),
        topics: model.topics(),
        seed: model.seed,
        n_iters: model.n_iters,
        w: DenseMatrix::from_array(&model.w),
        h: DenseMatrix::from_array(&model.h),
        loss_trace: model.loss_trace.iter().map(|v| v.as_f64()).collect(),
        scaling_params: cast_scaling(&model.scaling),
        normalized: model.normalized,
        ids: model.ids.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json<T: Scalar>(json: &str) -> Result<SunModel<T>> {
    let file: ModelFile = serde_json::from_str(json).map_err(|e| Error::invalid(format!("model file: {e}")))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported model format_version {}",
            file.format_version
        )));
    }
    let w: Array2<T> = file.w.into_array("W")?;
    let h: Array2<T> = file.h.into_array("H")?;
    if h.nrows() != file.topics || w.ncols() != file.topics || h.ncols() != file.scaling_params.dim() + 1 {
        return Err(Error::invalid("model file: inconsistent shapes"));
    }
    if !file.ids.is_empty() && file.ids.len() != w.nrows() {
        return Err(Error::invalid("model file: ids do not match W rows"));
    }
    Ok(SunModel {
        w,
        h,
        alpha: T::lit(file.alpha),
        seed: file.seed,
        n_iters: file.n_iters,
        loss_trace: file.loss_trace.into_iter().map(T::lit).collect(),
        scaling: cast_scaling(&file.scaling_params),
        normalized: file.normalized,
        ids: file.ids,
    })
}

pub fn save_model<T: Scalar>(path: &Path, model: &SunModel<T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    std::fs::write(path, model_to_json(model)).map_err(io_err(path))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<SunModel<T>> {
    let json = std::fs::read_to_string(path).map_err(io_err(path))?;
    model_from_json(&json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sunmodel::{fit, FitOptions, SupervisedMatrix};
    use ndarray::array;

    #[test]
    fn json_round_trip_is_bit_identical() {
        let m = array![[0.1, -0.3], [1.0 / 3.0, 2.0], [5.5, -1.25], [0.0, 0.7]];
        let y = array![1.0, -0.5, 0.25, 2.0];
        let x = SupervisedMatrix::from_raw(m.view(), y.view(), 0.4, 2.0).unwrap();
        let model = fit(&x, FitOptions::new(2, 3).iters(7))
            .unwrap()
            .with_ids(vec!["a".into(), "b".into(), "c".into(), "d".into()])
            .unwrap();
        let json = model_to_json(&model);
        let back: SunModel<f64> = model_from_json(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(model_to_json(&back), json);
        assert!(json.contains("\"format_version\""));
    }

    #[test]
    fn rejects_unknown_version() {
        let m = array![[0.1], [0.2], [0.4]];
        let y = array![1.0, 2.0, 0.0];
        let x = SupervisedMatrix::from_raw(m.view(), y.view(), 0.5, 2.0).unwrap();
        let model = fit(&x, FitOptions::new(1, 0).iters(2)).unwrap();
        let json = model_to_json(&model).replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(model_from_json::<f64>(&json).is_err());
    }
}
