//! Python bindings: problem files, templates, the solver and the prox catalog.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pdfbf_core::cli::schema::ProxSpec;
use pdfbf_core::cli::templates;
use pdfbf_core::cli::{self, BuiltProblem, InjectPreset, ProblemFile, SolveArgs};
use pdfbf_core::fbf::{fbf_step, kkt_residual, ErrorInjector, PrimalDualState};
use pdfbf_core::linalg::{Space, Vector};
use pdfbf_core::prox::{moreau_residual, prox_conjugate, ProxFunction};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_list(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn check_len(what: &str, got: usize, want: usize) -> PyResult<()> {
    if got != want {
        return Err(PyValueError::new_err(format!("{what}: expected length {want}, got {got}")));
    }
    Ok(())
}

/// A problem definition, parsed and checked for shapes.
#[pyclass(module = "pdfbf", unsendable)]
struct Problem {
    file: ProblemFile,
    built: BuiltProblem,
}

impl Problem {
    fn new(file: ProblemFile) -> PyResult<Self> {
        let built = file.build().map_err(value_error)?;
        Ok(Problem { file, built })
    }

    fn state(&self, x: Vec<f64>, v: Vec<Vec<f64>>) -> PyResult<PrimalDualState> {
        let spec = &self.built.problem;
        check_len("x", x.len(), spec.space().dim())?;
        check_len("v", v.len(), spec.m())?;
        for (i, (vi, b)) in v.iter().zip(spec.blocks()).enumerate() {
            check_len(&format!("v[{i}]"), vi.len(), b.space().dim())?;
        }
        Ok(PrimalDualState::new(
            Vector::from_vec(x),
            v.into_iter().map(Vector::from_vec).collect(),
        ))
    }
}

#[pymethods]
impl Problem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Problem::new(ProblemFile::from_json(text).map_err(value_error)?)
    }

    #[staticmethod]
    fn from_template(name: &str) -> PyResult<Self> {
        let file = templates::template(name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown template {name:?}")))?;
        Problem::new(file)
    }

    /// `½‖x − b‖² + λ‖x‖₁`.
    #[staticmethod]
    fn lasso(b: Vec<f64>, lam: f64) -> PyResult<Self> {
        Problem::new(templates::lasso(&Vector::from_vec(b), lam))
    }

    fn to_json(&self) -> String {
        self.file.to_json()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.built.problem.space().dim()
    }

    #[getter]
    fn num_blocks(&self) -> usize {
        self.built.problem.m()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.built.policy.beta()
    }

    /// `(ε, (1 − ε)/β)`.
    #[getter]
    fn gamma_bounds(&self) -> (f64, f64) {
        self.built.policy.bounds()
    }

    /// Known solution `(x, [v_i])`, if the file carries one.
    #[getter]
    fn reference(&self) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        self.built
            .reference
            .as_ref()
            .map(|s| (to_list(&s.x), s.v.iter().map(to_list).collect()))
    }

    /// Sampled operator property checks as `(property, subject, passed, detail)`.
    #[pyo3(signature = (seed = 0))]
    fn validate(&self, seed: u64) -> Vec<(String, String, bool, String)> {
        cli::property_checks(&self.built, seed)
            .into_iter()
            .map(|c| (c.property.to_string(), c.subject, c.passed, c.detail))
            .collect()
    }

    #[pyo3(signature = (tol = None, max_iter = None, inject = None, seed = None, trace_every = None))]
    fn solve(
        &self,
        tol: Option<f64>,
        max_iter: Option<usize>,
        inject: Option<&str>,
        seed: Option<u64>,
        trace_every: Option<usize>,
    ) -> PyResult<SolveResult> {
        let inject = match inject {
            Some(s) => Some(
                InjectPreset::parse(s)
                    .ok_or_else(|| PyValueError::new_err(format!("unknown preset {s:?}")))?,
            ),
            None => None,
        };
        let args = SolveArgs {
            tol,
            max_iter,
            // run_solve only checks that a trace is requested
            trace: trace_every.map(|_| "trace.csv".into()),
            trace_every: trace_every.unwrap_or(1),
            seed,
            inject,
            output: None,
        };
        let outcome = cli::run_solve(&self.file, &args).map_err(value_error)?;
        let report = &outcome.report;
        let fin = &report.solve.final_state;
        Ok(SolveResult {
            x: to_list(&fin.x),
            v: fin.v.iter().map(to_list).collect(),
            termination: report.solve.termination.as_str().to_string(),
            iterations: report.solve.iterations,
            kkt: report.solve.kkt,
            residuals: report.solve.residual_history.iter().map(|r| r.joint()).collect(),
            primal_objective: report.objectives.map(|o| o.primal),
            dual_objective: report.objectives.map(|o| o.dual),
            gap: report.objectives.map(|o| o.gap),
            exit_code: outcome.exit_code,
            result_json: outcome.result.to_string(),
            trace: outcome.trace,
        })
    }

    #[pyo3(signature = (x, v, gamma = 1.0))]
    fn kkt_residual(&self, x: Vec<f64>, v: Vec<Vec<f64>>, gamma: f64) -> PyResult<f64> {
        let state = self.state(x, v)?;
        Ok(kkt_residual(&self.built.problem, &state, gamma))
    }

    /// One error-free iteration from `(x, v)`; `gamma` defaults to the policy step.
    #[pyo3(signature = (x, v, gamma = None))]
    fn step(&self, x: Vec<f64>, v: Vec<Vec<f64>>, gamma: Option<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let state = self.state(x, v)?;
        let gamma = match gamma {
            Some(g) => g,
            None => self.built.policy.gamma(0).map_err(value_error)?,
        };
        let (next, _) = fbf_step(&self.built.problem, &state, gamma, &ErrorInjector::none().at(0), None)
            .map_err(value_error)?;
        Ok((to_list(&next.x), next.v.iter().map(to_list).collect()))
    }
}

#[pyclass(module = "pdfbf", get_all)]
struct SolveResult {
    x: Vec<f64>,
    v: Vec<Vec<f64>>,
    termination: String,
    iterations: usize,
    kkt: f64,
    /// Joint residual per iteration.
    residuals: Vec<f64>,
    primal_objective: Option<f64>,
    dual_objective: Option<f64>,
    gap: Option<f64>,
    /// Exit code the command-line tool would return.
    exit_code: i32,
    result_json: String,
    trace: Option<String>,
}

#[pymethods]
impl SolveResult {
    #[getter]
    fn converged(&self) -> bool {
        self.termination == "ResidualTolerance"
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(termination={}, iterations={}, kkt={:.3e})",
            self.termination, self.iterations, self.kkt
        )
    }
}

/// A catalog function, described by the same JSON object used in problem
/// files, e.g. `{"kind": "l1", "weight": 0.5}`.
#[pyclass(module = "pdfbf", unsendable)]
struct Prox {
    f: ProxFunction,
}

#[pymethods]
impl Prox {
    #[new]
    fn new(spec: &str, dim: usize) -> PyResult<Self> {
        let parsed: ProxSpec = serde_json::from_str(spec).map_err(value_error)?;
        let space = Space::new(dim).map_err(value_error)?;
        Ok(Prox {
            f: parsed.build(space, "prox").map_err(value_error)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.f.space().dim()
    }

    fn prox(&self, gamma: f64, y: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len("y", y.len(), self.dim())?;
        Ok(to_list(&self.f.prox(gamma, &Vector::from_vec(y))))
    }

    fn conjugate_prox(&self, gamma: f64, y: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len("y", y.len(), self.dim())?;
        Ok(to_list(&prox_conjugate(&self.f, gamma, &Vector::from_vec(y))))
    }

    fn value(&self, x: Vec<f64>) -> PyResult<Option<f64>> {
        check_len("x", x.len(), self.dim())?;
        Ok(self.f.value(&Vector::from_vec(x)))
    }

    fn moreau_residual(&self, gamma: f64, y: Vec<f64>) -> PyResult<f64> {
        check_len("y", y.len(), self.dim())?;
        Ok(moreau_residual(&self.f, gamma, &Vector::from_vec(y)))
    }
}

#[pyfunction]
fn template_names() -> Vec<&'static str> {
    cli::TEMPLATE_NAMES.to_vec()
}

#[pyfunction]
fn describe_template(name: &str) -> Option<&'static str> {
    templates::describe(name)
}

#[pyfunction]
fn soft_threshold(z: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    pdfbf_core::oracle::soft_threshold_oracle(&Vector::from_vec(z), lam)
        .map(|x| to_list(&x))
        .map_err(value_error)
}

#[pymodule]
fn pdfbf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<SolveResult>()?;
    m.add_class::<Prox>()?;
    m.add_function(wrap_pyfunction!(template_names, m)?)?;
    m.add_function(wrap_pyfunction!(describe_template, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    Ok(())
}
