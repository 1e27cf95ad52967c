//! Python bindings: similarity matrices, the assignment solver, split and
//! oracle values, estimators, bounds and the experiment harness.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;

use revsplit::bounds::{self, BoundInputs};
use revsplit::harness::{self, ExperimentConfig, Format, StageLoads, Variant};
use revsplit::{dataio, DrawMode, DrawParams, Error, MatchSpec, PapMode, R2Choice};

create_exception!(revsplit_py, InfeasibleError, PyException);

fn err(e: Error) -> PyErr {
    match e {
        Error::Infeasible(_) => InfeasibleError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "SimilarityMatrix", module = "revsplit_py", frozen)]
struct PySimilarity(revsplit::SimilarityMatrix);

#[pymethods]
impl PySimilarity {
    #[new]
    #[pyo3(signature = (rows, reviewer_ids=None, paper_ids=None))]
    fn new(
        rows: Vec<Vec<f64>>,
        reviewer_ids: Option<Vec<String>>,
        paper_ids: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let s = match (reviewer_ids, paper_ids) {
            (None, None) => revsplit::SimilarityMatrix::from_rows(rows),
            (r, p) => {
                let n_r = rows.len();
                let n_p = rows.first().map_or(0, Vec::len);
                let r = r.unwrap_or_else(|| (0..n_r).map(|i| format!("r{i}")).collect());
                let p = p.unwrap_or_else(|| (0..n_p).map(|i| format!("p{i}")).collect());
                revsplit::SimilarityMatrix::new(r, p, rows)
            }
        };
        s.map(PySimilarity).map_err(err)
    }

    /// Loads a similarity CSV.
    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        dataio::load_similarity_csv(path).map(PySimilarity).map_err(err)
    }

    /// Loads a dataset string: a CSV path, `bids:<path>` or `gen:<spec>`.
    #[staticmethod]
    fn load(dataset: &str) -> PyResult<Self> {
        harness::load_dataset(dataset).map(PySimilarity).map_err(err)
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        dataio::save_similarity_csv(&self.0, path).map_err(err)
    }

    fn split_copies(&self, copies: usize) -> PyResult<Self> {
        dataio::split_reviewer_copies(&self.0, copies).map(PySimilarity).map_err(err)
    }

    #[getter]
    fn n_reviewers(&self) -> usize {
        self.0.n_reviewers()
    }

    #[getter]
    fn n_papers(&self) -> usize {
        self.0.n_papers()
    }

    #[getter]
    fn reviewer_ids(&self) -> Vec<String> {
        self.0.reviewer_ids().to_vec()
    }

    #[getter]
    fn paper_ids(&self) -> Vec<String> {
        self.0.paper_ids().to_vec()
    }

    fn get(&self, reviewer: usize, paper: usize) -> PyResult<f64> {
        if reviewer >= self.0.n_reviewers() || paper >= self.0.n_papers() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.0.get(reviewer, paper))
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.to_rows()
    }

    fn __repr__(&self) -> String {
        format!("SimilarityMatrix({} reviewers x {} papers)", self.0.n_reviewers(), self.0.n_papers())
    }
}

#[pyclass(name = "LoadConfig", module = "revsplit_py", frozen)]
struct PyLoads(revsplit::LoadConfig);

#[pymethods]
impl PyLoads {
    #[new]
    fn new(ell_rev: u32, ell_pap1: u32, ell_pap2: u32, beta: f64) -> PyResult<Self> {
        revsplit::LoadConfig::new(ell_rev, ell_pap1, ell_pap2, beta)
            .map(PyLoads)
            .map_err(err)
    }

    /// All loads 1.
    #[staticmethod]
    fn unit(beta: f64) -> PyResult<Self> {
        Self::new(1, 1, 1, beta)
    }

    #[getter]
    fn ell_rev(&self) -> u32 {
        self.0.ell_rev
    }

    #[getter]
    fn ell_pap1(&self) -> u32 {
        self.0.ell_pap1
    }

    #[getter]
    fn ell_pap2(&self) -> u32 {
        self.0.ell_pap2
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }

    fn default_r2_size(&self, n_reviewers: usize) -> usize {
        self.0.default_r2_size(n_reviewers)
    }

    fn __repr__(&self) -> String {
        let l = &self.0;
        format!(
            "LoadConfig(ell_rev={}, ell_pap1={}, ell_pap2={}, beta={})",
            l.ell_rev, l.ell_pap1, l.ell_pap2, l.beta
        )
    }
}

#[pyclass(name = "Assignment", module = "revsplit_py", frozen)]
struct PyAssignment(revsplit::Assignment);

#[pymethods]
impl PyAssignment {
    #[getter]
    fn pairs(&self) -> Vec<(usize, usize)> {
        self.0.pairs().to_vec()
    }

    #[getter]
    fn value(&self) -> f64 {
        self.0.value()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Assignment({} pairs, value={})", self.0.len(), self.0.value())
    }
}

fn pap_mode(mode: &str) -> PyResult<PapMode> {
    match mode {
        "exact" => Ok(PapMode::Exact),
        "at-most" | "at_most" => Ok(PapMode::AtMost),
        "floor-ceil" | "floor_ceil" => Ok(PapMode::FloorCeil),
        other => Err(PyValueError::new_err(format!("unknown paper-load mode {other:?}"))),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Maximum-similarity assignment of `reviewers` (default all) to `papers`
/// (default all).
#[pyfunction]
#[pyo3(signature = (s, ell_rev, ell_pap, mode="exact", reviewers=None, papers=None, excluded=None))]
fn solve(
    s: &PySimilarity,
    ell_rev: u32,
    ell_pap: f64,
    mode: &str,
    reviewers: Option<Vec<usize>>,
    papers: Option<Vec<usize>>,
    excluded: Option<Vec<(usize, usize)>>,
) -> PyResult<PyAssignment> {
    let spec = MatchSpec {
        reviewer_subset: reviewers.unwrap_or_else(|| (0..s.0.n_reviewers()).collect()),
        paper_subset: papers.unwrap_or_else(|| (0..s.0.n_papers()).collect()),
        ell_rev,
        ell_pap,
        pap_mode: pap_mode(mode)?,
        excluded_pairs: excluded.unwrap_or_default(),
    };
    revsplit::solve(&s.0, &spec).map(PyAssignment).map_err(err)
}

/// Unit-load matching keeping at least `1/mu` of the assignment's value.
#[pyfunction]
fn extract_unit_matching(s: &PySimilarity, pairs: Vec<(usize, usize)>, mu: u32) -> PyResult<PyAssignment> {
    let a = revsplit::Assignment::from_pairs(&s.0, pairs).map_err(err)?;
    revsplit::extract_unit_matching(&s.0, &a, mu).map(PyAssignment).map_err(err)
}

/// Mean similarity Q of committing `r2` to the second stage.
#[pyfunction]
fn split_value(s: &PySimilarity, r2: Vec<usize>, p2: Vec<usize>, loads: &PyLoads) -> PyResult<f64> {
    revsplit::split_value(&s.0, &r2, &p2, &loads.0)
        .map(|r| r.mean_sim)
        .map_err(err)
}

/// Split value with paper loads as upper bounds.
#[pyfunction]
fn split_value_underloaded(
    s: &PySimilarity,
    r2: Vec<usize>,
    p2: Vec<usize>,
    loads: &PyLoads,
) -> PyResult<f64> {
    revsplit::split_value_underloaded(&s.0, &r2, &p2, &loads.0)
        .map(|r| r.mean_sim)
        .map_err(err)
}

/// Oracle value Q* for a known second-stage paper set.
#[pyfunction]
fn oracle_optimal(s: &PySimilarity, p2: Vec<usize>, loads: &PyLoads) -> PyResult<f64> {
    revsplit::oracle_optimal(&s.0, &p2, &loads.0)
        .map(|r| r.mean_sim)
        .map_err(err)
}

/// Draws `(r2, p2)`.
#[pyfunction]
#[pyo3(signature = (s, loads, mode="uniform", seed=0))]
fn draw_split(s: &PySimilarity, loads: &PyLoads, mode: &str, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let split = revsplit::draw_split(&s.0, &loads.0, parse(mode)?, &DrawParams::default(), seed)
        .map_err(err)?;
    Ok((split.r2, split.p2))
}

/// Monte Carlo estimate `(mean, stderr)` of the split value; `r2=None`
/// redraws the reviewer split per sample.
#[pyfunction]
#[pyo3(signature = (s, loads, n_samples, seed=0, r2=None, p2_mode="uniform"))]
fn estimate_f(
    s: &PySimilarity,
    loads: &PyLoads,
    n_samples: usize,
    seed: u64,
    r2: Option<Vec<usize>>,
    p2_mode: &str,
) -> PyResult<(f64, f64)> {
    let choice = r2.map_or(R2Choice::Redraw, R2Choice::Fixed);
    let mode: DrawMode = parse(p2_mode)?;
    revsplit::estimate_f(&s.0, &choice, &loads.0, n_samples, seed, mode, &DrawParams::default())
        .map(|e| (e.mean, e.stderr))
        .map_err(err)
}

/// Synthetic instance from a generator spec such as `thm2:n=10,beta=1`.
#[pyfunction]
fn generate(spec: &str) -> PyResult<PySimilarity> {
    harness::generate(spec).map(PySimilarity).map_err(err)
}

/// `E[min(X / ell, 1)]` for `X ~ Binomial(n, p)`.
#[pyfunction]
fn binom_min_expectation(n: u64, p: f64, ell: f64) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&p) || ell < 1.0 {
        return Err(PyValueError::new_err("need 0 <= p <= 1 and ell >= 1"));
    }
    Ok(bounds::binom_min_expectation(n, p, ell))
}

/// All bound forms at one load scale, as a dict. Forms that do not apply
/// are `None`.
#[pyfunction]
fn bound_table(py: Python<'_>, mu: u32, beta: f64, s_mu: f64, s_1: f64) -> PyResult<Py<PyAny>> {
    let b = BoundInputs::new(mu, beta, s_mu, s_1).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("thm5_simple", bounds::thm5_bound_simple(&b).ok())?;
    d.set_item("thm5_general", bounds::thm5_bound_general(&b).map_err(err)?)?;
    d.set_item("thm5_exact", bounds::thm5_bound_exact(&b).map_err(err)?)?;
    d.set_item("thm5_normal", bounds::thm5_bound_normal(&b).map_err(err)?)?;
    d.set_item("thm6_simple", bounds::thm6_bound_simple(&b).ok())?;
    d.set_item("thm6_general", bounds::thm6_bound_general(&b).ok())?;
    d.set_item("thm6_normal", bounds::thm6_bound_normal(&b).ok())?;
    d.set_item("thm6_exact", bounds::thm6_bound_exact_total(&b).ok())?;
    Ok(d.into_any().unbind())
}

/// Runs the random-split experiment and returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (dataset, betas, trials=10, seed=0, loads=(2, 2, 6), p2_mode="uniform", variant="standard"))]
fn simulate(
    dataset: &str,
    betas: Vec<f64>,
    trials: usize,
    seed: u64,
    loads: (u32, u32, u32),
    p2_mode: &str,
    variant: &str,
) -> PyResult<String> {
    let cfg = ExperimentConfig {
        dataset: dataset.to_owned(),
        betas,
        trials,
        loads: StageLoads { ell_pap1: loads.0, ell_pap2: loads.1, ell_rev: loads.2 },
        p2_mode: parse(p2_mode)?,
        seed,
        variant: parse::<Variant>(variant)?,
        ..ExperimentConfig::default()
    };
    let report = harness::run_split_experiment(&cfg).map_err(err)?.without_timing();
    let mut out = Vec::new();
    harness::write_report(&report, &mut out, Format::Json).map_err(err)?;
    String::from_utf8(out).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn revsplit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_class::<PySimilarity>()?;
    m.add_class::<PyLoads>()?;
    m.add_class::<PyAssignment>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(extract_unit_matching, m)?)?;
    m.add_function(wrap_pyfunction!(split_value, m)?)?;
    m.add_function(wrap_pyfunction!(split_value_underloaded, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(draw_split, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_f, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(binom_min_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(bound_table, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
