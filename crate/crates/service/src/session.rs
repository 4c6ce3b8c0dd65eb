//! Session state machine, independent of HTTP.
//!
//! A session is fully determined by its event log: the create request
//! followed by preferences, batch requests and an optional close. Every
//! mutation appends to the log, and [`Session::replay`] rebuilds an equal
//! session from it.

use curate::dis_gc::{run_on_values, DisGcConfig};
use curate::preference::{PosteriorSnapshot, PosteriorState, PreferenceObservation};
use curate::problem::Problem;
use curate::{ActionPoint, CurateError, CurationObjectiveParams, Kernel};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

fn default_m() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// `gauss1d`, `ackley2d` or `knapsack`.
    pub problem: String,
    /// Shape of the qualitative-desirability kernel; its amplitude is replaced by `σ²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_m")]
    pub m: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSettings>,
}

/// Overrides for the per-batch diversified search.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_dis: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRequest {
    pub winner: usize,
    pub loser: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Create { request: CreateSession },
    Preference { winner: usize, loser: usize },
    NextBatch,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Index into the problem's action representation.
    pub index: usize,
    pub action: ActionPoint,
    pub y: f64,
    pub posterior_mean: f64,
    pub posterior_variance: f64,
    /// Half-width of the 95% band of `U`.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchView {
    pub batch: usize,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub batch: BatchView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceResponse {
    pub preferences: usize,
    /// Every served candidate, by index, under the updated posterior.
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub status: Status,
    pub problem: String,
    pub sigma: f64,
    pub m: u64,
    pub seed: u64,
    pub batches: Vec<BatchView>,
    pub history: Vec<PreferenceObservation>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    problem: Problem,
    params: CurationObjectiveParams,
    generator: DisGcConfig,
    seed: u64,
    posterior: PosteriorState,
    batches: Vec<Vec<usize>>,
    status: Status,
    events: Vec<Event>,
}

/// Seed of batch `k`: the first word of stream `k` of the session seed.
pub fn batch_seed(seed: u64, k: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng.next_u64()
}

impl Session {
    /// Validates the request, builds the prior and serves the first batch.
    pub fn create(id: String, request: CreateSession) -> Result<Session, ApiError> {
        let problem = Problem::from_tag(&request.problem, request.seed)?;
        let sigma = request.sigma.unwrap_or(problem.sigma);
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(ApiError::bad_request(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if request.m == 0 {
            return Err(ApiError::bad_request("m must be at least 1"));
        }
        let shape = request.kernel.unwrap_or(problem.kernel);
        shape.validate()?;
        let params = CurationObjectiveParams::new(sigma, request.m, shape.with_amplitude(1.0))?;
        let g = request.generator.unwrap_or_default();
        let base = DisGcConfig::default();
        let n = g.n.unwrap_or(base.n.max(request.m as usize));
        let generator = DisGcConfig {
            n,
            iterations: g.iterations.unwrap_or(base.iterations.max(n)),
            sigma2_dis: g.sigma2_dis.unwrap_or(base.sigma2_dis),
            ..base
        };
        if generator.n < request.m as usize || generator.iterations < generator.n {
            return Err(ApiError::bad_request(format!(
                "need iterations >= n >= m, got iterations={}, n={}, m={}",
                generator.iterations, generator.n, request.m
            )));
        }
        let posterior = PosteriorState::prior(problem.space.clone(), shape.with_amplitude(sigma * sigma))?;
        let mut session = Session {
            id,
            problem,
            params,
            generator,
            seed: request.seed,
            posterior,
            batches: Vec::new(),
            status: Status::Active,
            events: vec![Event::Create { request }],
        };
        session.generate()?;
        Ok(session)
    }

    /// Rebuilds a session from its event log.
    pub fn replay(id: String, events: &[Event]) -> Result<Session, ApiError> {
        let Some((Event::Create { request }, rest)) = events.split_first() else {
            return Err(ApiError::bad_request("event log must start with a create event"));
        };
        let mut s = Session::create(id, request.clone())?;
        for e in rest {
            match e {
                Event::Create { .. } => return Err(ApiError::bad_request("duplicate create event")),
                Event::Preference { winner, loser } => {
                    s.submit(PreferenceRequest { winner: *winner, loser: *loser })?;
                }
                Event::NextBatch => {
                    s.next_batch()?;
                }
                Event::Close => s.close()?,
            }
        }
        Ok(s)
    }

    fn generate(&mut self) -> Result<(), ApiError> {
        let k = self.batches.len();
        let y: Vec<f64> = self.problem.y.iter().zip(self.posterior.mean()).map(|(a, b)| a + b).collect();
        let cfg = DisGcConfig { seed: batch_seed(self.seed, k), ..self.generator };
        let out = run_on_values(&self.problem.space, &y, &self.params, &cfg, None)?;
        self.batches.push(out.indices);
        Ok(())
    }

    fn ensure_active(&self) -> Result<(), ApiError> {
        match self.status {
            Status::Active => Ok(()),
            Status::Closed => Err(ApiError::conflict(format!("session {} is closed", self.id))),
        }
    }

    fn served(&self, idx: usize) -> bool {
        self.batches.iter().any(|b| b.contains(&idx))
    }

    pub fn submit(&mut self, req: PreferenceRequest) -> Result<PreferenceResponse, ApiError> {
        self.ensure_active()?;
        if req.winner == req.loser {
            return Err(ApiError::bad_request("winner and loser must differ"));
        }
        for idx in [req.winner, req.loser] {
            if !self.served(idx) {
                return Err(ApiError::bad_request(format!("action {idx} has not been served in this session")));
            }
        }
        let space = self.posterior.space();
        let obs = PreferenceObservation::new(space.point(req.winner), space.point(req.loser));
        self.posterior.update(obs)?;
        self.events.push(Event::Preference { winner: req.winner, loser: req.loser });
        Ok(PreferenceResponse { preferences: self.posterior.history().len(), candidates: self.served_candidates() })
    }

    pub fn next_batch(&mut self) -> Result<BatchView, ApiError> {
        self.ensure_active()?;
        self.generate()?;
        self.events.push(Event::NextBatch);
        Ok(self.batch_view(self.batches.len() - 1))
    }

    pub fn close(&mut self) -> Result<(), ApiError> {
        self.ensure_active()?;
        self.status = Status::Closed;
        self.events.push(Event::Close);
        Ok(())
    }

    fn candidate(&self, index: usize) -> Candidate {
        let p = self.posterior.predict_index(index);
        Candidate {
            index,
            action: self.problem.point(index),
            y: self.problem.y[index],
            posterior_mean: p.mean,
            posterior_variance: p.variance,
            band: p.band(),
        }
    }

    fn batch_view(&self, k: usize) -> BatchView {
        BatchView { batch: k, candidates: self.batches[k].iter().map(|&i| self.candidate(i)).collect() }
    }

    fn served_candidates(&self) -> Vec<Candidate> {
        let mut idx: Vec<usize> = self.batches.iter().flatten().copied().collect();
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter().map(|i| self.candidate(i)).collect()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn posterior(&self) -> &PosteriorState {
        &self.posterior
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn latest_batch(&self) -> BatchView {
        self.batch_view(self.batches.len() - 1)
    }

    pub fn create_response(&self) -> CreateResponse {
        CreateResponse { id: self.id.clone(), batch: self.batch_view(0) }
    }

    pub fn snapshot(&self, full_cov: bool) -> PosteriorSnapshot {
        self.posterior.snapshot(full_cov)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            status: self.status,
            problem: self.problem.name.clone(),
            sigma: self.params.sigma,
            m: self.params.m,
            seed: self.seed,
            batches: (0..self.batches.len()).map(|k| self.batch_view(k)).collect(),
            history: self.posterior.history().to_vec(),
            events: self.events.clone(),
        }
    }
}

impl From<CurateError> for ApiError {
    fn from(e: CurateError) -> Self {
        match e {
            CurateError::DegenerateComparison { .. } => ApiError::unprocessable("degenerate_comparison", e.to_string()),
            CurateError::Argument(_)
            | CurateError::Domain(_)
            | CurateError::Representation(_)
            | CurateError::Dimension { .. }
            | CurateError::Infeasible(_)
            | CurateError::DegenerateKernel => ApiError::bad_request(e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}
