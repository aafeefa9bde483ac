//! Encoder and the two discriminator branches.
//!
//! The encoder runs once per iteration over six stacked blocks of `N`
//! states, in this order: imitator `s`, imitator `s'`, noisy expert `s`,
//! noisy expert `s'`, anchor `s`, anchor `s'`. Branch gradients are
//! scattered back onto those rows before a single backward pass per branch.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::RngCore;

use super::das::Slot;
use crate::nn::{bce_with_logits, BiasInit, grad_reverse, threshold_accuracy, DenseNet, ForwardCache, HeadKind, NetGrads};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DidaNets {
    pub encoder: DenseNet,
    pub noise_disc: DenseNet,
    pub policy_disc: DenseNet,
}

impl DidaNets {
    pub fn new(
        state_dim: usize,
        embed_dim: usize,
        hidden: &[usize],
        bias_init: BiasInit,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let mut net = |i, o, head| DenseNet::with_bias_init(i, hidden, o, head, 0.0, bias_init, rng);
        Ok(Self {
            encoder: net(state_dim, embed_dim, HeadKind::Linear)?,
            noise_disc: net(embed_dim, 1, HeadKind::Sigmoid)?,
            policy_disc: net(2 * embed_dim, 1, HeadKind::Sigmoid)?,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    /// `σ = [G_f(s) | G_f(s')]`.
    pub fn pair_embeddings(&self, states: ArrayView2<f64>, next_states: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.encoder.predict(states)?;
        let z2 = self.encoder.predict(next_states)?;
        Ok(concatenate![Axis(1), z, z2])
    }

    /// Imitator reward `D_p(σ)`, a probability in (0, 1).
    pub fn imitator_rewards(&self, states: ArrayView2<f64>, next_states: ArrayView2<f64>) -> Result<Vec<f64>> {
        let sigma = self.pair_embeddings(states, next_states)?;
        Ok(self.policy_disc.predict(sigma.view())?.column(0).to_vec())
    }
}

/// Noise-discriminator loss and gradients for one pass.
#[derive(Debug, Clone)]
pub struct NoiseBranch {
    pub loss: f64,
    pub p_acc: f64,
    pub disc_grads: NetGrads,
    /// `∂L_n/∂z` for the stacked batch `[Z_I; Z̃_E; Z̃_A]`.
    pub grad_z: Array2<f64>,
}

/// Binary cross-entropy with label 0 for `Z_I` and 1 for `Z̃_E`, `Z̃_A`.
/// Accuracy counts a probability of exactly 0.5 as the noisy class.
pub fn noise_branch_update(
    noise_disc: &DenseNet,
    z_i: ArrayView2<f64>,
    z_e: ArrayView2<f64>,
    z_a: ArrayView2<f64>,
) -> Result<NoiseBranch> {
    if z_i.dim() != z_e.dim() || z_i.dim() != z_a.dim() {
        return Err(Error::Shape(format!(
            "noise branch batches differ: {:?}, {:?}, {:?}",
            z_i.dim(),
            z_e.dim(),
            z_a.dim()
        )));
    }
    let n = z_i.nrows();
    let inputs = concatenate![Axis(0), z_i, z_e, z_a];
    let labels: Vec<f64> = (0..3 * n).map(|k| if k < n { 0.0 } else { 1.0 }).collect();
    let (probs, cache) = noise_disc.forward(inputs.view())?;
    let (loss, grad_logits) = bce_with_logits(cache.pre_head().view(), &labels);
    let p_acc = threshold_accuracy(&probs.column(0).to_vec(), &labels);
    let (disc_grads, grad_z) = noise_disc.backward_pre_head(&cache, grad_logits.view())?;
    Ok(NoiseBranch { loss, p_acc, disc_grads, grad_z })
}

/// Policy-discriminator loss and gradients for one pass.
#[derive(Debug, Clone)]
pub struct PolicyBranch {
    pub loss: f64,
    pub accuracy: f64,
    pub disc_grads: NetGrads,
    /// `∂L_p/∂σ` for the noisy-expert pairs.
    pub grad_expert: Array2<f64>,
    /// `∂L_p/∂σ` for the mixed pairs.
    pub grad_mix: Array2<f64>,
}

/// Binary cross-entropy with label 1 for `σ̃_E` and 0 for the mixed batch.
pub fn policy_branch_update(
    policy_disc: &DenseNet,
    sigma_e: ArrayView2<f64>,
    sigma_mix: ArrayView2<f64>,
) -> Result<PolicyBranch> {
    if sigma_e.ncols() != sigma_mix.ncols() || sigma_e.ncols() != policy_disc.in_dim() {
        return Err(Error::Shape(format!(
            "policy branch pairs {:?} / {:?} for a discriminator of width {}",
            sigma_e.dim(),
            sigma_mix.dim(),
            policy_disc.in_dim()
        )));
    }
    let ne = sigma_e.nrows();
    let inputs = concatenate![Axis(0), sigma_e, sigma_mix];
    let labels: Vec<f64> = (0..inputs.nrows()).map(|k| if k < ne { 1.0 } else { 0.0 }).collect();
    let (probs, cache) = policy_disc.forward(inputs.view())?;
    let (loss, grad_logits) = bce_with_logits(cache.pre_head().view(), &labels);
    let accuracy = threshold_accuracy(&probs.column(0).to_vec(), &labels);
    let (disc_grads, grad_sigma) = policy_disc.backward_pre_head(&cache, grad_logits.view())?;
    Ok(PolicyBranch {
        loss,
        accuracy,
        disc_grads,
        grad_expert: grad_sigma.slice(s![..ne, ..]).to_owned(),
        grad_mix: grad_sigma.slice(s![ne.., ..]).to_owned(),
    })
}

/// Row offsets of the six stacked encoder blocks.
#[derive(Debug, Clone, Copy)]
pub struct Blocks {
    pub n: usize,
}

impl Blocks {
    pub fn imitator(&self) -> usize {
        0
    }
    pub fn imitator_next(&self) -> usize {
        self.n
    }
    pub fn expert(&self) -> usize {
        2 * self.n
    }
    pub fn expert_next(&self) -> usize {
        3 * self.n
    }
    pub fn anchor(&self) -> usize {
        4 * self.n
    }
    pub fn anchor_next(&self) -> usize {
        5 * self.n
    }
    pub fn rows(&self) -> usize {
        6 * self.n
    }
}

#[derive(Debug, Clone)]
pub struct EncoderGrads {
    /// `g_p`: policy-branch gradient reaching the encoder unscaled.
    pub policy: NetGrads,
    /// `−λ g_n`: noise-branch gradient after the reversal layer.
    pub noise_reversed: NetGrads,
    /// `g_p − λ g_n`.
    pub total: NetGrads,
}

/// Route both branch gradients back to the stacked encoder rows and
/// backpropagate each through the encoder.
pub fn encoder_gradients(
    encoder: &DenseNet,
    cache: &ForwardCache,
    blocks: Blocks,
    noise: &NoiseBranch,
    policy: &PolicyBranch,
    provenance: &[Slot],
    lambda: f64,
) -> Result<EncoderGrads> {
    let n = blocks.n;
    let d = encoder.out_dim();
    if cache.batch_size() != blocks.rows() || noise.grad_z.nrows() != 3 * n || provenance.len() != n {
        return Err(Error::Shape("encoder gradient routing: batch sizes disagree".into()));
    }
    let mut gn = Array2::<f64>::zeros((blocks.rows(), d));
    gn.slice_mut(s![blocks.imitator()..blocks.imitator() + n, ..]).assign(&noise.grad_z.slice(s![..n, ..]));
    gn.slice_mut(s![blocks.expert()..blocks.expert() + n, ..]).assign(&noise.grad_z.slice(s![n..2 * n, ..]));
    gn.slice_mut(s![blocks.anchor()..blocks.anchor() + n, ..]).assign(&noise.grad_z.slice(s![2 * n.., ..]));

    let mut gp = Array2::<f64>::zeros((blocks.rows(), d));
    let ne = policy.grad_expert.nrows();
    for j in 0..ne {
        add_row(&mut gp, blocks.expert() + j, policy.grad_expert.slice(s![j, ..d]));
        add_row(&mut gp, blocks.expert_next() + j, policy.grad_expert.slice(s![j, d..]));
    }
    for (j, slot) in provenance.iter().enumerate() {
        let (cur, next) = match *slot {
            Slot::Anchor(a) => (blocks.anchor() + a, blocks.anchor_next() + a),
            Slot::Imitator(t) => (blocks.imitator() + t, blocks.imitator_next() + t),
        };
        add_row(&mut gp, cur, policy.grad_mix.slice(s![j, ..d]));
        add_row(&mut gp, next, policy.grad_mix.slice(s![j, d..]));
    }

    let (policy_grads, _) = encoder.backward(cache, gp.view())?;
    let (noise_reversed, _) = encoder.backward(cache, grad_reverse(gn.view(), lambda).view())?;
    let mut total = policy_grads.clone();
    total.add_assign(&noise_reversed);
    Ok(EncoderGrads { policy: policy_grads, noise_reversed, total })
}

fn add_row(target: &mut Array2<f64>, row: usize, values: ndarray::ArrayView1<f64>) {
    let mut r = target.row_mut(row);
    r += &values;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::check_gradient;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nets(seed: u64) -> DidaNets {
        DidaNets::new(3, 2, &[5, 4], BiasInit::FanInUniform, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn constant_disc(width: usize) -> DenseNet {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = DenseNet::new(width, &[3], 1, HeadKind::Sigmoid, 0.0, &mut rng).unwrap();
        let zeros = vec![0.0; net.num_params()];
        net.set_params_from_slice(&zeros).unwrap();
        net
    }

    #[test]
    fn constant_noise_disc_gives_ln2_and_two_thirds() {
        let d = constant_disc(2);
        let z = Array2::from_shape_fn((4, 2), |(i, j)| i as f64 - j as f64);
        let b = noise_branch_update(&d, z.view(), z.view(), z.view()).unwrap();
        assert!((b.loss - std::f64::consts::LN_2).abs() < 1e-15);
        // Every output is exactly 0.5, which the tie rule maps to the noisy class.
        assert!((b.p_acc - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_noise_disc_scores_one() {
        // One linear unit on the first coordinate with a huge weight.
        let layer = crate::nn::Dense { weight: array![[1e3, 0.0]], bias: array![0.0] };
        let d = DenseNet::from_layers(vec![layer], HeadKind::Sigmoid, None).unwrap();
        let zi = array![[-1.0, 0.0], [-2.0, 5.0]];
        let ze = array![[1.0, 0.0], [3.0, -1.0]];
        let b = noise_branch_update(&d, zi.view(), ze.view(), ze.view()).unwrap();
        assert_eq!(b.p_acc, 1.0);
        assert!(b.loss < 1e-100);
    }

    #[test]
    fn constant_policy_disc_gives_ln2_and_half_rewards() {
        let d = constant_disc(4);
        let sigma = Array2::from_elem((5, 4), 0.3);
        let b = policy_branch_update(&d, sigma.view(), sigma.view()).unwrap();
        assert!((b.loss - std::f64::consts::LN_2).abs() < 1e-15);
        let mut n = nets(1);
        n.policy_disc = constant_disc(4);
        let s = Array2::from_elem((3, 3), 0.1);
        assert_eq!(n.imitator_rewards(s.view(), s.view()).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn size_mismatch_is_a_shape_error() {
        let n = nets(2);
        let a = Array2::zeros((3, 2));
        let b = Array2::zeros((4, 2));
        assert!(matches!(noise_branch_update(&n.noise_disc, a.view(), a.view(), b.view()), Err(Error::Shape(_))));
        let p = Array2::zeros((3, 3));
        assert!(policy_branch_update(&n.policy_disc, p.view(), p.view()).is_err());
    }

    /// Rebuilds both losses as plain functions of the encoder parameters and
    /// checks the routed gradients, and their combination, against central
    /// differences.
    #[test]
    fn encoder_direction_is_policy_minus_lambda_noise() {
        let nets = nets(3);
        let n = 3;
        let blocks = Blocks { n };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((blocks.rows(), 3), |_| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let provenance = vec![Slot::Imitator(2), Slot::Anchor(1), Slot::Imitator(0)];
        let lambda = 0.37;

        let losses = |enc: &DenseNet| -> (f64, f64) {
            let z = enc.predict(x.view()).unwrap();
            let blk = |start: usize| z.slice(s![start..start + n, ..]).to_owned();
            let nb = noise_branch_update(
                &nets.noise_disc,
                blk(blocks.imitator()).view(),
                blk(blocks.expert()).view(),
                blk(blocks.anchor()).view(),
            )
            .unwrap();
            let pair = |a: usize, b: usize| concatenate![Axis(1), z.row(a).insert_axis(Axis(0)), z.row(b).insert_axis(Axis(0))];
            let sigma_e = concatenate![
                Axis(0),
                pair(blocks.expert(), blocks.expert_next()),
                pair(blocks.expert() + 1, blocks.expert_next() + 1),
                pair(blocks.expert() + 2, blocks.expert_next() + 2)
            ];
            let mix_rows: Vec<Array2<f64>> = provenance
                .iter()
                .map(|s| match *s {
                    Slot::Anchor(a) => pair(blocks.anchor() + a, blocks.anchor_next() + a),
                    Slot::Imitator(t) => pair(blocks.imitator() + t, blocks.imitator_next() + t),
                })
                .collect();
            let views: Vec<_> = mix_rows.iter().map(|r| r.view()).collect();
            let sigma_mix = ndarray::concatenate(Axis(0), &views).unwrap();
            let pb = policy_branch_update(&nets.policy_disc, sigma_e.view(), sigma_mix.view()).unwrap();
            (pb.loss, nb.loss)
        };

        let (z, cache) = nets.encoder.forward(x.view()).unwrap();
        let blk = |start: usize| z.slice(s![start..start + n, ..]).to_owned();
        let nb = noise_branch_update(
            &nets.noise_disc,
            blk(blocks.imitator()).view(),
            blk(blocks.expert()).view(),
            blk(blocks.anchor()).view(),
        )
        .unwrap();
        let sigma_e = concatenate![Axis(1), blk(blocks.expert()), blk(blocks.expert_next())];
        let mut sigma_mix = Array2::zeros((n, 4));
        for (j, s) in provenance.iter().enumerate() {
            let (a, b) = match *s {
                Slot::Anchor(a) => (blocks.anchor() + a, blocks.anchor_next() + a),
                Slot::Imitator(t) => (blocks.imitator() + t, blocks.imitator_next() + t),
            };
            sigma_mix.slice_mut(s![j, ..2]).assign(&z.row(a));
            sigma_mix.slice_mut(s![j, 2..]).assign(&z.row(b));
        }
        let pb = policy_branch_update(&nets.policy_disc, sigma_e.view(), sigma_mix.view()).unwrap();
        let g = encoder_gradients(&nets.encoder, &cache, blocks, &nb, &pb, &provenance, lambda).unwrap();

        let params = nets.encoder.params_to_vec();
        let eval = |theta: &[f64]| {
            let mut enc = nets.encoder.clone();
            enc.set_params_from_slice(theta).unwrap();
            losses(&enc)
        };
        let gp = g.policy.to_vec();
        let rp = check_gradient(&params, &gp, 1e-5, |t| eval(t).0);
        assert!(rp.max_rel_error < 1e-6, "policy branch {rp:?}");
        let gn: Vec<f64> = g.noise_reversed.to_vec().iter().map(|v| v / -lambda).collect();
        let rn = check_gradient(&params, &gn, 1e-5, |t| eval(t).1);
        assert!(rn.max_rel_error < 1e-6, "noise branch {rn:?}");
        let total = g.total.to_vec();
        let rt = check_gradient(&params, &total, 1e-5, |t| {
            let (lp, ln) = eval(t);
            lp - lambda * ln
        });
        assert!(rt.max_rel_error < 1e-6, "combined {rt:?}");
        for ((t, p), r) in total.iter().zip(&gp).zip(g.noise_reversed.to_vec()) {
            assert_eq!(*t, p + r);
        }
    }
}
