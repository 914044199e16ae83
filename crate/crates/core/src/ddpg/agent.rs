//! Actor, critic and their slowly tracking target copies.

use ndarray::{s, Array2};

use super::nn::{Activation, DenseNet, Gradients};
use super::replay::Transition;
use crate::exec::{map_range, Execution};
use crate::seeding::Rng;
use crate::{Error, Result};

/// Batch rows per gradient work item. Fixed so that the summation order,
/// and therefore every bit of the result, is independent of the
/// execution mode.
pub const GRAD_CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub target_actor: DenseNet,
    pub target_critic: DenseNet,
}

fn rows(vectors: &[&[f64]], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((vectors.len(), width));
    for (mut row, v) in m.rows_mut().into_iter().zip(vectors) {
        row.assign(&ndarray::ArrayView1::from(*v));
    }
    m
}

fn concat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("equal batch sizes")
}

fn chunks(len: usize) -> Vec<std::ops::Range<usize>> {
    (0..len.div_ceil(GRAD_CHUNK))
        .map(|k| k * GRAD_CHUNK..((k + 1) * GRAD_CHUNK).min(len))
        .collect()
}

fn sum_in_order(parts: Vec<(Gradients, f64)>) -> (Gradients, f64) {
    let mut it = parts.into_iter();
    let (mut total, mut scalar) = it.next().expect("non-empty batch");
    for (g, s) in it {
        total.add_assign(&g);
        scalar += s;
    }
    (total, scalar)
}

impl Agent {
    /// Actor `state -> hidden... -> action` ending in the `(0, 1)` squashing;
    /// critic `state ++ action -> hidden... -> 1`, linear output. Targets
    /// start as exact copies.
    pub fn new(state_len: usize, action_len: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let actor_sizes: Vec<usize> = std::iter::once(state_len)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(action_len))
            .collect();
        let critic_sizes: Vec<usize> = std::iter::once(state_len + action_len)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let actor = DenseNet::new(&actor_sizes, Activation::Relu, Activation::HalfTanh, rng);
        let critic = DenseNet::new(&critic_sizes, Activation::Relu, Activation::Identity, rng);
        Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        }
    }

    /// Assembles an agent from explicit networks, checking that they fit
    /// together.
    pub fn from_nets(actor: DenseNet, critic: DenseNet, target_actor: DenseNet, target_critic: DenseNet) -> Result<Self> {
        let fits = actor.same_shape(&target_actor)
            && critic.same_shape(&target_critic)
            && critic.input_len() == actor.input_len() + actor.output_len()
            && critic.output_len() == 1;
        if !fits {
            return Err(Error::Checkpoint("actor and critic shapes do not fit together".into()));
        }
        Ok(Self {
            actor,
            critic,
            target_actor,
            target_critic,
        })
    }

    pub fn state_len(&self) -> usize {
        self.actor.input_len()
    }

    pub fn action_len(&self) -> usize {
        self.actor.output_len()
    }

    /// Greedy action.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.actor.forward(state.into())?.to_vec())
    }

    /// Actor output plus `noise`, clipped to `[0, 1]`.
    pub fn select_action(&self, state: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        if noise.len() != self.action_len() {
            return Err(Error::Dimension {
                what: "exploration noise",
                expected: self.action_len(),
                got: noise.len(),
            });
        }
        let mut a = self.act(state)?;
        for (a, n) in a.iter_mut().zip(noise) {
            *a = (*a + n).clamp(0.0, 1.0);
        }
        Ok(a)
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let input: Vec<f64> = state.iter().chain(action).copied().collect();
        Ok(self.critic.forward(input.as_slice().into())?[0])
    }

    fn check_batch(&self, batch: &[&Transition]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Dimension {
                what: "batch",
                expected: 1,
                got: 0,
            });
        }
        for t in batch {
            for (what, got, expected) in [
                ("batch state", t.state.len(), self.state_len()),
                ("batch next state", t.next_state.len(), self.state_len()),
                ("batch action", t.action.len(), self.action_len()),
            ] {
                if got != expected {
                    return Err(Error::Dimension { what, expected, got });
                }
            }
        }
        Ok(())
    }

    /// Bootstrapped targets `r + discount * Q'(s', pi'(s'))`, just `r` for
    /// terminal transitions.
    pub fn target_values(&self, batch: &[&Transition], discount: f64) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let next: Vec<&[f64]> = batch.iter().map(|t| t.next_state.as_slice()).collect();
        let s = rows(&next, self.state_len());
        let a = self.target_actor.forward_batch(s.view())?;
        let q = self.target_critic.forward_batch(concat(&s, &a).view())?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if t.done || discount == 0.0 {
                    t.reward
                } else {
                    t.reward + discount * q[[i, 0]]
                }
            })
            .collect())
    }

    /// Gradient of the mean squared error `(1/V) sum (y - Q(s, a))^2` and
    /// the loss itself.
    pub fn critic_gradient(&self, batch: &[&Transition], targets: &[f64], exec: Execution) -> Result<(Gradients, f64)> {
        self.check_batch(batch)?;
        let v = batch.len() as f64;
        let ranges = chunks(batch.len());
        let parts = map_range(exec, ranges.len(), |k| -> Result<(Gradients, f64)> {
            let range = ranges[k].clone();
            let part = &batch[range.clone()];
            let x: Vec<Vec<f64>> = part
                .iter()
                .map(|t| t.state.iter().chain(&t.action).copied().collect())
                .collect();
            let x: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
            let trace = self.critic.forward_trace(rows(&x, self.critic.input_len()).view())?;
            let q = trace.output().column(0).to_owned();
            let y = &targets[range];
            let mut grad = Array2::zeros((part.len(), 1));
            let mut loss = 0.0;
            for i in 0..part.len() {
                let residual = y[i] - q[i];
                loss += residual * residual / v;
                grad[[i, 0]] = -2.0 * residual / v;
            }
            let (g, _) = self.critic.backward(&trace, grad.view(), true);
            Ok((g.expect("parameter gradients requested"), loss))
        });
        let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(sum_in_order(parts))
    }

    /// Gradient of `-(1/V) sum Q(s, pi(s))` with respect to the actor
    /// parameters, i.e. descent on it ascends Q.
    pub fn actor_gradient(&self, batch: &[&Transition], exec: Execution) -> Result<Gradients> {
        self.check_batch(batch)?;
        let v = batch.len() as f64;
        let sl = self.state_len();
        let ranges = chunks(batch.len());
        let parts = map_range(exec, ranges.len(), |k| -> Result<(Gradients, f64)> {
            let part = &batch[ranges[k].clone()];
            let states: Vec<&[f64]> = part.iter().map(|t| t.state.as_slice()).collect();
            let s = rows(&states, sl);
            let actor_trace = self.actor.forward_trace(s.view())?;
            let critic_trace = self.critic.forward_trace(concat(&s, actor_trace.output()).view())?;
            let ones = Array2::from_elem((part.len(), 1), 1.0);
            let (_, dq_dinput) = self.critic.backward(&critic_trace, ones.view(), false);
            let grad_out = dq_dinput.slice(s![.., sl..]).mapv(|g| -g / v);
            let (g, _) = self.actor.backward(&actor_trace, grad_out.view(), true);
            Ok((g.expect("parameter gradients requested"), 0.0))
        });
        let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(sum_in_order(parts).0)
    }

    /// One descent step on the critic loss. Returns the loss before the
    /// step.
    pub fn critic_update(&mut self, batch: &[&Transition], discount: f64, lr: f64, exec: Execution) -> Result<f64> {
        let targets = self.target_values(batch, discount)?;
        let (g, loss) = self.critic_gradient(batch, &targets, exec)?;
        if !g.is_finite() || !loss.is_finite() {
            return Err(Error::NonFinite("critic gradient"));
        }
        self.critic.descend(&g, lr);
        Ok(loss)
    }

    /// One ascent step on `Q(s, pi(s))` for the actor.
    pub fn actor_update(&mut self, batch: &[&Transition], lr: f64, exec: Execution) -> Result<()> {
        let g = self.actor_gradient(batch, exec)?;
        if !g.is_finite() {
            return Err(Error::NonFinite("actor gradient"));
        }
        self.actor.descend(&g, lr);
        Ok(())
    }

    /// `target <- omega * primary + (1 - omega) * target` for both pairs.
    pub fn soft_update(&mut self, omega: f64) {
        self.target_actor.blend_from(&self.actor, omega);
        self.target_critic.blend_from(&self.critic, omega);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream;

    fn transition(s: Vec<f64>, a: Vec<f64>, r: f64, done: bool) -> Transition {
        Transition {
            next_state: s.iter().map(|v| v * 0.5).collect(),
            state: s,
            action: a,
            reward: r,
            done,
        }
    }

    fn zero_agent() -> Agent {
        Agent {
            actor: DenseNet::zeros(&[2, 4, 3], Activation::Relu, Activation::HalfTanh),
            critic: DenseNet::zeros(&[5, 4, 1], Activation::Relu, Activation::Identity),
            target_actor: DenseNet::zeros(&[2, 4, 3], Activation::Relu, Activation::HalfTanh),
            target_critic: DenseNet::zeros(&[5, 4, 1], Activation::Relu, Activation::Identity),
        }
    }

    #[test]
    fn clipping_and_zero_noise() {
        let agent = zero_agent();
        assert_eq!(agent.select_action(&[1.0, 2.0], &[0.0; 3]).unwrap(), vec![0.5; 3]);
        assert_eq!(agent.select_action(&[1.0, 2.0], &[0.6, -0.7, 0.1]).unwrap(), vec![1.0, 0.0, 0.6]);
    }

    #[test]
    fn targets() {
        let agent = zero_agent();
        let a = transition(vec![1.0, 0.0], vec![0.1, 0.2, 0.3], -1.0, false);
        let b = transition(vec![0.0, 1.0], vec![0.1, 0.2, 0.3], -2.0, true);
        assert_eq!(agent.target_values(&[&a, &b], 0.6).unwrap(), vec![-1.0, -2.0]);
        let mut rng = stream(9, 0);
        let trained = Agent::new(2, 3, &[4], &mut rng);
        assert_eq!(trained.target_values(&[&a, &b], 0.0).unwrap(), vec![-1.0, -2.0]);
        assert_eq!(trained.target_values(&[&b], 0.9).unwrap(), vec![-2.0]);
    }

    #[test]
    fn zero_critic_leaves_actor() {
        let mut rng = stream(8, 0);
        let mut agent = Agent::new(2, 3, &[4], &mut rng);
        agent.critic = DenseNet::zeros(&[5, 4, 1], Activation::Relu, Activation::Identity);
        let before = agent.actor.clone();
        let t = transition(vec![0.3, 0.7], vec![0.1, 0.2, 0.3], -1.0, false);
        agent.actor_update(&[&t], 1e-2, Execution::Sequential).unwrap();
        assert_eq!(agent.actor, before);
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        let mut rng = stream(8, 1);
        let mut agent = Agent::new(2, 3, &[4], &mut rng);
        let mut t = transition(vec![0.3, 0.7], vec![0.1, 0.2, 0.3], 0.0, true);
        t.reward = agent.q_value(&t.state, &t.action).unwrap();
        let before = agent.critic.clone();
        let loss = agent.critic_update(&[&t], 0.6, 0.1, Execution::Sequential).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(agent.critic, before);
    }

    #[test]
    fn chunked_modes_agree_bitwise() {
        let mut rng = stream(8, 2);
        let agent = Agent::new(3, 2, &[6, 5], &mut rng);
        let batch: Vec<Transition> = (0..21)
            .map(|i| {
                let x = i as f64 / 21.0;
                transition(vec![x, 1.0 - x, 0.5], vec![x * x, 0.3], -x, i % 5 == 0)
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = agent.target_values(&refs, 0.6).unwrap();
        let (gs, ls) = agent.critic_gradient(&refs, &y, Execution::Sequential).unwrap();
        let (gp, lp) = agent.critic_gradient(&refs, &y, Execution::Parallel).unwrap();
        assert_eq!(gs, gp);
        assert_eq!(ls.to_bits(), lp.to_bits());
        assert_eq!(
            agent.actor_gradient(&refs, Execution::Sequential).unwrap(),
            agent.actor_gradient(&refs, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn soft_update_identities() {
        let mut rng = stream(8, 3);
        let mut agent = Agent::new(2, 1, &[3], &mut rng);
        let n = agent.actor.num_params();
        agent.actor.set_params(&vec![1.0; n]).unwrap();
        agent.target_actor.set_params(&vec![0.0; n]).unwrap();
        let before = agent.target_actor.clone();
        agent.soft_update(0.0);
        assert_eq!(agent.target_actor, before);
        agent.soft_update(0.01);
        assert!(agent.target_actor.params().iter().all(|&p| p == 0.01));
        agent.target_actor.set_params(&vec![0.0; n]).unwrap();
        agent.soft_update(0.5);
        agent.soft_update(0.5);
        assert!(agent.target_actor.params().iter().all(|&p| p == 0.75));
        agent.soft_update(1.0);
        assert_eq!(agent.target_actor, agent.actor);
        assert_eq!(agent.target_critic, agent.critic);
    }
}
