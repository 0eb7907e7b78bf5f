"""End-to-end smoke test of the python bindings (no pytest needed)."""

import math
import os
import tempfile

import numpy as np

import mixreg


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * (1.0 + abs(a) + abs(b))


def main():
    spec = mixreg.sample_spec(2, 4, 0.5, 11)
    assert spec.components.shape == (2, 4)
    for row in spec.components:
        assert close(np.linalg.norm(row), 2.0, 1e-12)
    assert spec.sigma == 0.5

    prompt = mixreg.sample_prompt(spec, 5, 12)
    assert len(prompt.xs) == 6 and len(prompt.ys) == 5
    assert 1 <= prompt.latent_index <= 2

    summary = mixreg.posterior_mean_predict(prompt, spec)
    assert close(sum(summary.probs), 1.0, 1e-12)
    assert all(p >= 0.0 for p in summary.probs)
    assert math.isfinite(summary.prediction)
    assert not summary.noiseless_limit

    residuals = mixreg.residual_matrix(prompt, spec.components)
    assert residuals.shape == (6, 2)

    circuit = mixreg.run_circuit(prompt, spec)
    assert close(circuit, summary.prediction, 1e-10)
    stages = mixreg.run_circuit_stages(prompt, spec)
    assert len(stages) == 10

    assert math.isfinite(mixreg.argmin_predict(prompt, spec.components))
    assert math.isfinite(mixreg.ols_predict(prompt))
    assert close(mixreg.gelu(0.0), 0.0, 1e-15)
    assert close(sum(mixreg.softmax(np.array([1.0, 2.0, 3.0]))), 1.0, 1e-12)

    noisy = mixreg.MixtureSpec()
    noisy.components = spec.components
    noisy.sigma = 0.1
    prompts = [mixreg.sample_prompt(noisy, 8, 1000 + i) for i in range(300)]
    fit = mixreg.em_fit(prompts, 2, 0.1, seed=5, restarts=3)
    assert fit.weights.shape == (2, 4)
    assert close(sum(fit.mix), 1.0, 1e-12)
    excess = mixreg.oracle_pred_error(fit.weights, noisy) - 0.1**2
    assert 0.0 <= excess < 1.0, excess

    curve = mixreg.eval_mse_curve("posterior_mean", 2, 4, 0.5, 21, k_min=1, k_max=4, n=64)
    again = mixreg.eval_mse_curve("posterior_mean", 2, 4, 0.5, 21, k_min=1, k_max=4, n=64)
    assert curve.k_values == [1, 2, 3, 4]
    assert list(curve.means) == list(again.means)
    assert all(math.isfinite(v) for v in curve.means)
    assert all(n == 64 for n in curve.counts)

    dist = mixreg.eval_sq_distance("circuit", "posterior_mean", 2, 4, 0.5, 22, k_min=1,
                                   k_max=3, n=32)
    assert max(dist.means) <= 1e-18
    assert "posterior_mean" in mixreg.predictor_names()

    config = mixreg.TrainConfig()
    config.model.p = 8
    config.model.n_heads = 1
    config.model.d_att = 4
    config.model.d_ff = 16
    config.model.n_layers = 1
    config.m = 2
    config.d = 3
    config.sigma = 0.5
    config.k_min = 1
    config.k_max = 3
    config.batch_size = 2
    config.curriculum_phase_steps = 3
    config.final_steps = 5
    config.seed = 33
    train_spec = mixreg.sample_spec(config.m, config.d, config.sigma, 34)
    result = mixreg.train(config, train_spec)
    assert len(result.trace) == 5
    assert [row.step for row in result.trace] == list(range(5))
    assert all(math.isfinite(row.raw_loss) for row in result.trace)

    train_prompt = mixreg.sample_prompt(train_spec, 3, 35)
    pred = mixreg.model_query_prediction(result.model, train_prompt)
    assert math.isfinite(pred)
    loss = mixreg.batch_loss(result.model, [train_prompt])
    assert math.isfinite(loss) and loss >= 0.0

    path = os.path.join(tempfile.mkdtemp(), "model.bin")
    mixreg.save_model(path, result.model)
    loaded = mixreg.load_model(path)
    assert mixreg.model_query_prediction(loaded, train_prompt) == pred
    os.remove(path)

    print("smoke test passed")


if __name__ == "__main__":
    main()
