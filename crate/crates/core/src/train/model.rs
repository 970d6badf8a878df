//! Two-layer bigram language model used to exercise the training loop.
//!
//! `h = tanh(W1[:, prev] + b1)`, optional inverted dropout on `h`, then
//! `logits = W2·h + b2 (+ (α/r)·B·A·h)` and a softmax over the vocabulary.

use rand::Rng;

use super::loss::{label_smoothed_ce, softmax};
use super::tensor::{add_outer, matvec, matvec_t};
use super::{LoraAdapter, LoraConfig, Matrix, ParamGroup, ParamSet, Tensor, TrainError};

const W1: usize = 0;
const B1: usize = 1;
const W2: usize = 2;
const B2: usize = 3;
const LORA_A: usize = 4;
const LORA_B: usize = 5;

/// `(previous token, next token)`.
pub type Example = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct TinyLM {
    pub vocab_size: usize,
    pub hidden: usize,
    pub params: ParamSet,
    lora: Option<LoraConfig>,
}

/// Per-example dropout masks already divided by the keep probability.
pub struct Dropout<'a, R: Rng> {
    pub rate: f64,
    pub rng: &'a mut R,
}

struct Activations {
    h: Vec<f64>,
    mask: Option<Vec<f64>>,
    hd: Vec<f64>,
    lora_hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl TinyLM {
    /// Input weights uniform in ±1, output projection and biases zero, so the
    /// initial model predicts the uniform distribution.
    pub fn new<R: Rng>(vocab_size: usize, hidden: usize, rng: &mut R) -> Self {
        let mut model = Self::uniform(vocab_size, hidden);
        for x in model.params.tensors[W1].data.iter_mut() {
            *x = rng.gen_range(-1.0..1.0);
        }
        model
    }

    /// All-zero parameters: exactly uniform predictions.
    pub fn uniform(vocab_size: usize, hidden: usize) -> Self {
        let params = ParamSet::new(vec![
            Tensor::new("w1", ParamGroup::Input, false, (hidden, vocab_size)),
            Tensor::new("b1", ParamGroup::Input, true, (hidden, 1)),
            Tensor::new("w2", ParamGroup::Output, false, (vocab_size, hidden)),
            Tensor::new("b2", ParamGroup::Output, true, (vocab_size, 1)),
        ]);
        TinyLM {
            vocab_size,
            hidden,
            params,
            lora: None,
        }
    }

    /// Rebuilds a model from a parameter set with the standard layout.
    pub fn from_params(
        vocab_size: usize,
        hidden: usize,
        params: ParamSet,
        lora: Option<LoraConfig>,
    ) -> Result<Self, TrainError> {
        let mut template = Self::uniform(vocab_size, hidden);
        if let Some(cfg) = lora {
            template.push_adapter_tensors(cfg, None);
        }
        template.params.check_layout(&params)?;
        template.params = params;
        Ok(template)
    }

    fn push_adapter_tensors(&mut self, cfg: LoraConfig, a: Option<Matrix>) {
        let a_data = a.map(|m| m.data).unwrap_or_else(|| vec![0.0; cfg.rank * self.hidden]);
        self.params.tensors.push(
            Tensor::new("lora_a", ParamGroup::Adapter, false, (cfg.rank, self.hidden)).with_data(a_data),
        );
        self.params.tensors.push(Tensor::new(
            "lora_b",
            ParamGroup::Adapter,
            false,
            (self.vocab_size, cfg.rank),
        ));
        self.lora = Some(cfg);
    }

    /// Wraps the output projection with a fresh adapter (`B = 0`).
    pub fn attach_lora<R: Rng>(&mut self, cfg: LoraConfig, rng: &mut R) -> Result<(), TrainError> {
        if self.lora.is_some() {
            return Err(TrainError::Argument("adapter already attached".into()));
        }
        let adapter = LoraAdapter::init(cfg, self.hidden, self.vocab_size, rng)?;
        self.push_adapter_tensors(cfg, Some(adapter.a));
        Ok(())
    }

    pub fn lora_config(&self) -> Option<LoraConfig> {
        self.lora
    }

    pub fn adapter(&self) -> Option<LoraAdapter> {
        let cfg = self.lora?;
        let a = &self.params.tensors[LORA_A];
        let b = &self.params.tensors[LORA_B];
        Some(LoraAdapter {
            rank: cfg.rank,
            alpha: cfg.alpha,
            a: Matrix::from_vec(a.shape.0, a.shape.1, a.data.clone()).ok()?,
            b: Matrix::from_vec(b.shape.0, b.shape.1, b.data.clone()).ok()?,
        })
    }

    pub fn output_weight(&self) -> Matrix {
        let w = &self.params.tensors[W2];
        Matrix::from_vec(w.shape.0, w.shape.1, w.data.clone()).expect("w2 shape")
    }

    pub fn groups(&self) -> Vec<ParamGroup> {
        let mut g = vec![ParamGroup::Input, ParamGroup::Output];
        if self.lora.is_some() {
            g.push(ParamGroup::Adapter);
        }
        g
    }

    fn check_token(&self, t: usize) -> Result<(), TrainError> {
        if t >= self.vocab_size {
            return Err(TrainError::Argument(format!(
                "token {t} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        Ok(())
    }

    fn activations<R: Rng>(&self, prev: usize, dropout: Option<&mut Dropout<'_, R>>) -> Activations {
        let (v, hdim) = (self.vocab_size, self.hidden);
        let w1 = &self.params.tensors[W1].data;
        let b1 = &self.params.tensors[B1].data;
        let h: Vec<f64> = (0..hdim).map(|i| (w1[i * v + prev] + b1[i]).tanh()).collect();

        let mask = match dropout {
            Some(d) if d.rate > 0.0 => {
                let keep = 1.0 - d.rate;
                Some(
                    (0..hdim)
                        .map(|_| if d.rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect::<Vec<f64>>(),
                )
            }
            _ => None,
        };
        let hd: Vec<f64> = match &mask {
            Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => h.clone(),
        };

        let mut logits = matvec(&self.params.tensors[W2].data, v, hdim, &hd);
        for (z, b) in logits.iter_mut().zip(&self.params.tensors[B2].data) {
            *z += b;
        }
        let mut lora_hidden = Vec::new();
        if let Some(cfg) = self.lora {
            let s = cfg.alpha / cfg.rank as f64;
            lora_hidden = matvec(&self.params.tensors[LORA_A].data, cfg.rank, hdim, &hd);
            let delta = matvec(&self.params.tensors[LORA_B].data, v, cfg.rank, &lora_hidden);
            for (z, d) in logits.iter_mut().zip(delta) {
                *z += s * d;
            }
        }
        Activations {
            h,
            mask,
            hd,
            lora_hidden,
            probs: softmax(&logits),
        }
    }

    /// Next-token distribution in evaluation mode (no dropout).
    pub fn forward(&self, prev: usize) -> Result<Vec<f64>, TrainError> {
        self.check_token(prev)?;
        Ok(self.activations::<rand_chacha::ChaCha8Rng>(prev, None).probs)
    }

    /// Negative log-likelihood of `next` after `prev`, natural log.
    pub fn nll(&self, prev: usize, next: usize) -> Result<f64, TrainError> {
        self.check_token(next)?;
        Ok(-self.forward(prev)?[next].ln())
    }

    pub fn mean_nll(&self, examples: &[Example]) -> Result<f64, TrainError> {
        if examples.is_empty() {
            return Err(TrainError::Argument("no examples to evaluate".into()));
        }
        let mut sum = 0.0;
        for &(p, n) in examples {
            sum += self.nll(p, n)?;
        }
        Ok(sum / examples.len() as f64)
    }

    /// Mean label-smoothed loss over `batch`, evaluation mode.
    pub fn batch_loss(&self, batch: &[Example], epsilon: f64) -> Result<f64, TrainError> {
        let mut sum = 0.0;
        for &(p, n) in batch {
            self.check_token(p)?;
            let probs = self.activations::<rand_chacha::ChaCha8Rng>(p, None).probs;
            sum += label_smoothed_ce(&probs, n, epsilon)?.loss;
        }
        Ok(sum / batch.len() as f64)
    }

    /// Mean label-smoothed loss over `batch` and `loss_scale` times its
    /// gradient. Dropout masks, when enabled, are drawn in example order.
    pub fn loss_and_grad<R: Rng>(
        &self,
        batch: &[Example],
        epsilon: f64,
        mut dropout: Option<Dropout<'_, R>>,
        loss_scale: f64,
    ) -> Result<(f64, ParamSet), TrainError> {
        if batch.is_empty() {
            return Err(TrainError::Argument("empty batch".into()));
        }
        let (v, hdim) = (self.vocab_size, self.hidden);
        let mut grads = self.params.zeros_like();
        let mut loss_sum = 0.0;
        let coeff = loss_scale / batch.len() as f64;

        for &(prev, next) in batch {
            self.check_token(prev)?;
            let act = self.activations(prev, dropout.as_mut());
            let ls = label_smoothed_ce(&act.probs, next, epsilon)?;
            loss_sum += ls.loss;
            let dlogits: Vec<f64> = ls.grad_logits.iter().map(|g| g * coeff).collect();

            add_outer(&mut grads.tensors[W2].data, hdim, &dlogits, &act.hd, 1.0);
            for (g, d) in grads.tensors[B2].data.iter_mut().zip(&dlogits) {
                *g += d;
            }
            let mut dhd = matvec_t(&self.params.tensors[W2].data, v, hdim, &dlogits);

            if let Some(cfg) = self.lora {
                let s = cfg.alpha / cfg.rank as f64;
                add_outer(&mut grads.tensors[LORA_B].data, cfg.rank, &dlogits, &act.lora_hidden, s);
                let bt = matvec_t(&self.params.tensors[LORA_B].data, v, cfg.rank, &dlogits);
                add_outer(&mut grads.tensors[LORA_A].data, hdim, &bt, &act.hd, s);
                let at = matvec_t(&self.params.tensors[LORA_A].data, cfg.rank, hdim, &bt);
                for (d, a) in dhd.iter_mut().zip(at) {
                    *d += s * a;
                }
            }

            if let Some(mask) = &act.mask {
                for (d, m) in dhd.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            let (gw1, gb1) = grads.tensors.split_at_mut(B1);
            for i in 0..hdim {
                let dpre = dhd[i] * (1.0 - act.h[i] * act.h[i]);
                gw1[W1].data[i * v + prev] += dpre;
                gb1[0].data[i] += dpre;
            }
        }
        Ok((loss_sum / batch.len() as f64, grads))
    }

    /// Greedy continuation from `start`, never emitting tokens in `banned`.
    pub fn greedy_generate(
        &self,
        start: usize,
        len: usize,
        banned: &[usize],
    ) -> Result<Vec<usize>, TrainError> {
        let mut out = Vec::with_capacity(len);
        let mut prev = start;
        for _ in 0..len {
            let probs = self.forward(prev)?;
            let next = probs
                .iter()
                .enumerate()
                .filter(|(i, _)| !banned.contains(i))
                .fold(None::<(usize, f64)>, |best, (i, &p)| match best {
                    Some((_, bp)) if bp >= p => best,
                    _ => Some((i, p)),
                })
                .map(|(i, _)| i)
                .ok_or_else(|| TrainError::Argument("every token is banned".into()))?;
            out.push(next);
            prev = next;
        }
        Ok(out)
    }
}
