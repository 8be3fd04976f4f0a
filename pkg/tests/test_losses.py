import dataclasses

import numpy as np
import pytest

from radarbody import autodiff as ad
from radarbody import net
from radarbody.body import BodyParams, identity_rot6d, make_template, reconstruct
from radarbody.errors import ContractError
from radarbody.net.model import NetOutputs
from radarbody.seeding import seeded_rng

from test_pointnet import micro_config


def make_truth(template, b=1, t_len=2, seed=0):
    rng = seeded_rng("losses", seed)
    nj, nb, nv = template.n_joints, template.n_shape, template.n_vertices
    theta = identity_rot6d(b * t_len, nj) + rng.normal(scale=0.1, size=(b * t_len, nj, 6))
    beta = rng.normal(scale=0.3, size=(b * t_len, nb))
    gamma = rng.normal(size=(b * t_len, 3))
    params = BodyParams.from_arrays(theta.reshape(b * t_len, -1), beta, gamma)
    with ad.no_grad():
        out = reconstruct(template, params)
    return net.WindowTruth(
        theta=theta.reshape(b, t_len, -1), beta=beta.reshape(b, t_len, -1),
        gamma=gamma.reshape(b, t_len, 3), joints=out.joints.data.reshape(b, t_len, nj, 3),
        vertices=out.vertices.data.reshape(b, t_len, nv, 3),
        gamma_next=rng.normal(size=(b, t_len, 3)))


def outputs_from_truth(truth, perturb=None):
    """NetOutputs echoing the ground truth, optionally with one field changed."""
    fields = {
        "gamma_pred": truth.gamma_next, "coarse_joints": truth.joints,
        "theta": truth.theta, "beta": truth.beta, "gamma": truth.gamma,
    }
    if perturb:
        fields = {**fields, **perturb}
    return NetOutputs(gamma_pred=ad.Tensor(fields["gamma_pred"]),
                      coarse_joints=ad.Tensor(fields["coarse_joints"]),
                      fused=None,
                      theta=ad.Tensor(fields["theta"]),
                      beta=ad.Tensor(fields["beta"]),
                      gamma=ad.Tensor(fields["gamma"]))


@pytest.fixture(scope="module")
def template():
    return make_template(4, 12, 2, seed=0)


def test_losses_zero_at_optimum(template):
    truth = make_truth(template)
    total, report = net.compute_losses(outputs_from_truth(truth), truth, template,
                                       net.LossScales())
    assert report.l_pred == 0.0
    assert report.l_joint == 0.0
    assert report.l_beta == 0.0
    assert report.l_gamma == 0.0
    assert report.l_J < 1e-12
    assert report.l_M < 1e-12
    assert 0.0 <= report.l_theta < 1e-3  # arccos clamp tolerance
    assert report.l_total == pytest.approx(report.l_theta + report.l_J + report.l_M, abs=1e-15)


def test_losses_gamma_offset_equivariance(template):
    truth = make_truth(template, seed=1)
    offset = np.array([0.02, 0.0, 0.0])
    out = outputs_from_truth(truth, perturb={"gamma": truth.gamma + offset})
    _, report = net.compute_losses(out, truth, template, net.LossScales())
    assert report.l_gamma == pytest.approx(0.02, abs=1e-12)
    assert report.l_J == pytest.approx(0.02, abs=1e-9)      # every joint moves with gamma
    assert report.l_M == pytest.approx(0.02, abs=1e-9)
    assert report.l_theta < 1e-3
    assert report.l_pred == 0.0 and report.l_joint == 0.0 and report.l_beta == 0.0


def test_losses_coarse_skeleton_mean_reduction(template):
    truth = make_truth(template, seed=2)
    out = outputs_from_truth(
        truth, perturb={"coarse_joints": truth.joints + np.array([0.01, 0, 0])})
    _, report = net.compute_losses(out, truth, template, net.LossScales())
    assert report.l_joint == pytest.approx(0.01, abs=1e-12)


def test_losses_scale_linearity(template):
    truth = make_truth(template, seed=3)
    out = outputs_from_truth(truth, perturb={"gamma_pred": truth.gamma_next + 0.1})
    _, base = net.compute_losses(out, truth, template, net.LossScales())
    out = outputs_from_truth(truth, perturb={"gamma_pred": truth.gamma_next + 0.1})
    _, doubled = net.compute_losses(out, truth, template, net.LossScales(pred=2.0))
    assert doubled.l_pred == pytest.approx(2 * base.l_pred, rel=1e-12)
    assert doubled.l_total - doubled.l_smpl - doubled.l_joint == pytest.approx(
        2 * (base.l_total - base.l_smpl - base.l_joint), rel=1e-12)


def test_losses_composition_identities(template):
    truth = make_truth(template, seed=4)
    rng = seeded_rng("loss-rand")
    out = outputs_from_truth(truth, perturb={
        "gamma_pred": truth.gamma_next + rng.normal(size=truth.gamma_next.shape) * 0.1,
        "coarse_joints": truth.joints + rng.normal(size=truth.joints.shape) * 0.1,
        "beta": truth.beta + rng.normal(size=truth.beta.shape) * 0.1,
    })
    scales = net.LossScales(pred=0.5, joint=2.0, theta=1.5, beta=3.0, gamma=0.7, J=1.1, M=0.9)
    _, r = net.compute_losses(out, truth, template, scales)
    assert r.l_smpl == pytest.approx(r.l_theta + r.l_beta + r.l_gamma + r.l_J + r.l_M, rel=1e-12)
    assert r.l_total == pytest.approx(r.l_joint + r.l_smpl + r.l_pred, rel=1e-12)
    assert 0.0 <= r.l_theta / scales.theta <= np.pi  # pose term is a mean angle


def test_losses_missing_term_named(template):
    truth = make_truth(template, seed=5)
    broken = dataclasses.replace(truth, vertices=None)
    with pytest.raises(ContractError, match="vertices"):
        net.compute_losses(outputs_from_truth(truth), broken, template, net.LossScales())


def test_losses_total_backpropagates(template):
    truth = make_truth(template, seed=6)
    theta = ad.Tensor(truth.theta + 0.05, requires_grad=True)
    out = NetOutputs(gamma_pred=ad.Tensor(truth.gamma_next), coarse_joints=ad.Tensor(truth.joints),
                     fused=None, theta=theta, beta=ad.Tensor(truth.beta),
                     gamma=ad.Tensor(truth.gamma))
    total, _ = net.compute_losses(out, truth, template, net.LossScales())
    ad.backward(total)
    assert theta.grad is not None and np.any(theta.grad != 0)
