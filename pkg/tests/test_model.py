import dataclasses

import numpy as np
import pytest
from sklearn.base import clone

from ponziwarn.model import (
    DualChannelClassifier,
    DualChannelConfig,
    DualChannelModel,
    FeatureScaler,
    TrainingDivergedError,
    train_model,
)
from ponziwarn.nn import Tensor, concat, graph_pool
from testutil import gradcheck, random_sample, separable_samples

RNG = np.random.Generator(np.random.Philox(400))


def small_config(**overrides):
    base = dict(hidden_dim=16, gnn_backbone="gcn", pooling="mean", epochs=3,
                batch_size=16, seed=0)
    base.update(overrides)
    return DualChannelConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError, match="hidden_dim"):
        DualChannelConfig(hidden_dim=20).validate()
    with pytest.raises(ValueError, match="gnn_backbone"):
        DualChannelConfig(gnn_backbone="sage").validate()
    with pytest.raises(ValueError, match="pooling"):
        DualChannelConfig(pooling="median").validate()
    with pytest.raises(ValueError, match="channels"):
        DualChannelConfig(channels="both").validate()
    assert DualChannelConfig().validate() is not None


def test_forward_outputs_normalized_log_probs():
    model = DualChannelModel(small_config())
    for _ in range(5):
        out = model.forward(random_sample(RNG))
        assert out.shape == (1, 2)
        assert np.exp(out.data).sum() == pytest.approx(1.0, abs=1e-9)


def test_zero_head_weights_give_uniform_prediction():
    model = DualChannelModel(small_config())
    model.head.W.data[:] = 0.0
    model.head.b.data[:] = 0.0
    out = model.forward(random_sample(RNG))
    assert np.allclose(out.data, np.log(0.5), atol=1e-12)


def test_forward_is_permutation_invariant():
    for pooling in ("max", "mean", "sum", "global_attention"):
        model = DualChannelModel(small_config(pooling=pooling))
        sample = random_sample(RNG, max_nodes=7)
        n = sample.n_nodes
        perm = RNG.permutation(n)
        inverse = np.argsort(perm)
        permuted = dataclasses.replace(
            sample,
            node_features=sample.node_features[perm],
            edge_index=np.stack([inverse[sample.edge_index[0]],
                                 inverse[sample.edge_index[1]]]),
        )
        a = model.forward(sample).data
        b = model.forward(permuted).data
        assert np.allclose(a, b, atol=1e-9), pooling


def test_no_mlp_ablation_concatenates_raw_code():
    config = small_config(use_code_mlp=False)
    model = DualChannelModel(config)
    assert model.code_mlp is None
    assert model.head.in_dim == 76 + 16
    sample = random_sample(RNG)
    zeroed = dataclasses.replace(sample, code=np.zeros(76))

    hidden = model.gnn1(Tensor(zeroed.node_features), zeroed.edge_index)
    hidden = model.gnn2(hidden, zeroed.edge_index)
    pooled = graph_pool(hidden, "mean")
    expected = model.head(concat([Tensor(np.zeros((1, 76))), pooled])).log_softmax()
    assert np.allclose(model.forward(zeroed).data, expected.data, atol=1e-12)
    # the code vector still flows into the head when non-zero
    assert not np.allclose(model.forward(sample).data, model.forward(zeroed).data)


def test_single_channel_models_ignore_the_other_input():
    code_model = DualChannelModel(small_config(channels="code"))
    sample = random_sample(RNG)
    other_graph = dataclasses.replace(
        sample, node_features=RNG.normal(size=sample.node_features.shape)
    )
    assert np.array_equal(code_model.forward(sample).data,
                          code_model.forward(other_graph).data)

    trans_model = DualChannelModel(small_config(channels="trans"))
    other_code = dataclasses.replace(sample, code=RNG.normal(size=76))
    assert np.array_equal(trans_model.forward(sample).data,
                          trans_model.forward(other_code).data)


@pytest.mark.parametrize("backbone,pooling", [("gcn", "mean"), ("gat", "global_attention")])
def test_full_model_gradcheck(backbone, pooling):
    from ponziwarn.nn import nll_loss

    config = small_config(gnn_backbone=backbone, pooling=pooling, dropout=0.0)
    model = DualChannelModel(config)
    sample = random_sample(RNG, label=1, max_nodes=5)
    gradcheck(lambda: nll_loss(model.forward(sample), [sample.label]),
              model.parameters())


def test_same_seed_same_parameters():
    a = DualChannelModel(small_config())
    b = DualChannelModel(small_config())
    for name, p in a.parameters().items():
        assert np.array_equal(p.data, b.parameters()[name].data)


def test_parameters_initialized_gaussian_std():
    model = DualChannelModel(DualChannelConfig(hidden_dim=128, init_std=0.1, seed=0))
    weights = np.concatenate([p.data.ravel() for p in model.parameters().values()])
    assert abs(weights.mean()) < 0.01
    assert abs(weights.std() - 0.1) < 0.01


def test_zero_epochs_returns_initialized_model():
    config = small_config(epochs=0)
    model = DualChannelModel(config)
    before = model.state_dict()
    history = train_model(model, [random_sample(RNG) for _ in range(4)], None, config)
    assert history == []
    for name, arr in model.state_dict().items():
        assert np.array_equal(arr, before[name])


def test_training_is_deterministic():
    samples = [random_sample(np.random.Generator(np.random.Philox([401, i])))
               for i in range(12)]

    def run():
        config = small_config(epochs=4)
        model = DualChannelModel(config)
        history = train_model(model, samples, samples, config)
        return history, model.state_dict()

    hist_a, state_a = run()
    hist_b, state_b = run()
    assert hist_a == hist_b
    for name in state_a:
        assert np.array_equal(state_a[name], state_b[name])


def test_training_loss_drops_on_separable_data():
    rng = np.random.Generator(np.random.Philox(402))
    samples = separable_samples(rng, n_per_class=12)
    config = small_config(epochs=200, batch_size=8, dropout=0.0)
    model = DualChannelModel(config)
    history = train_model(model, samples, None, config)
    assert history[-1]["train_loss"] < 0.05


def test_training_aborts_on_nan_loss():
    bad = dataclasses.replace(random_sample(RNG), code=np.full(76, np.nan))
    config = small_config(epochs=1)
    model = DualChannelModel(config)
    with pytest.raises(TrainingDivergedError, match="epoch 0, batch 0"):
        with np.errstate(invalid="ignore"):
            train_model(model, [bad], None, config)


def test_best_val_checkpoint_retained():
    rng = np.random.Generator(np.random.Philox(403))
    samples = separable_samples(rng, n_per_class=10)
    config = small_config(epochs=6, batch_size=8)
    model = DualChannelModel(config)
    history = train_model(model, samples, samples, config)
    best = max(h["val_f1"] for h in history)
    predictions = [model.predict_sample(s)[0] for s in samples]
    from ponziwarn.metrics import f1_score

    assert f1_score(predictions, [s.label for s in samples]) == pytest.approx(best)


def test_scaler_train_only_statistics():
    rng = np.random.Generator(np.random.Philox(404))
    train = [random_sample(rng) for _ in range(6)]
    scaler = FeatureScaler().fit(train)
    scaled = scaler.transform(train)
    stacked = np.concatenate([s.node_features for s in scaled])
    assert np.allclose(stacked.mean(axis=0), 0.0, atol=1e-9)
    codes = np.stack([s.code for s in scaled])
    assert np.allclose(codes.mean(axis=0), 0.0, atol=1e-9)
    # a held-out sample uses the same statistics, not its own
    other = random_sample(rng)
    transformed = scaler.transform([other])[0]
    assert np.allclose(transformed.code, (other.code - scaler.code_mean) / scaler.code_std)


def test_scaler_constant_columns_pass_through():
    rng = np.random.Generator(np.random.Philox(405))
    samples = [dataclasses.replace(random_sample(rng), code=np.zeros(76)) for _ in range(3)]
    scaler = FeatureScaler().fit(samples)
    assert np.allclose(scaler.transform(samples)[0].code, 0.0)


def test_classifier_fit_predict_shapes():
    rng = np.random.Generator(np.random.Philox(406))
    samples = separable_samples(rng, n_per_class=8)
    clf = DualChannelClassifier(hidden_dim=16, epochs=5, batch_size=8, seed=0)
    clf.fit(samples)
    proba = clf.predict_proba(samples)
    assert proba.shape == (16, 2)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)
    predictions = clf.predict(samples)
    assert set(predictions) <= {0, 1}
    assert clf.score(samples, [s.label for s in samples]) > 0.9


def test_classifier_predict_account_tuple():
    rng = np.random.Generator(np.random.Philox(407))
    samples = separable_samples(rng, n_per_class=6)
    clf = DualChannelClassifier(hidden_dim=16, epochs=4, batch_size=8).fit(samples)
    label, probability = clf.predict_account(samples[-1])
    proba = clf.predict_proba([samples[-1]])[0]
    assert label == int(proba.argmax())
    assert probability == pytest.approx(proba[1])


def test_predict_sample_maps_log_probs_to_label_and_probability():
    model = DualChannelModel(small_config())
    model.head.W.data[:] = 0.0
    # bias [ln 9, 0] makes softmax exactly (0.9, 0.1) regardless of input
    model.head.b.data = np.array([np.log(9.0), 0.0])
    label, probability = model.predict_sample(random_sample(RNG))
    assert label == 0
    assert probability == pytest.approx(0.1)
    model.head.b.data = np.array([0.0, np.log(9.0)])
    label, probability = model.predict_sample(random_sample(RNG))
    assert label == 1
    assert probability == pytest.approx(0.9)


def test_predicted_label_invariant_to_logit_shift():
    rng = np.random.Generator(np.random.Philox(408))
    samples = separable_samples(rng, n_per_class=6)
    clf = DualChannelClassifier(hidden_dim=16, epochs=3, batch_size=8).fit(samples)
    before = clf.predict(samples)
    clf.model_.head.b.data += 11.0  # same constant on both logits
    assert np.array_equal(clf.predict(samples), before)


def test_classifier_rejects_bad_inputs():
    clf = DualChannelClassifier(hidden_dim=16, epochs=1)
    with pytest.raises(ValueError):
        clf.fit([])
    rng = np.random.Generator(np.random.Philox(409))
    sample = random_sample(rng)
    with pytest.raises(TypeError):
        clf.fit([sample, "not-a-sample"])
    with pytest.raises(ValueError, match="hidden_dim"):
        DualChannelClassifier(hidden_dim=12, epochs=1).fit([sample, sample])
    with pytest.raises(ValueError, match="labels"):
        clf.fit([sample, sample], y=[0, 2])


def test_classifier_sklearn_params_roundtrip():
    clf = DualChannelClassifier(hidden_dim=32, pooling="sum", dropout=0.2)
    params = clf.get_params()
    assert params["hidden_dim"] == 32 and params["pooling"] == "sum"
    cloned = clone(clf)
    assert cloned.get_params() == params
    cloned.set_params(hidden_dim=64)
    assert cloned.hidden_dim == 64 and clf.hidden_dim == 32


def test_checkpoint_roundtrip_bit_identical(tmp_path):
    rng = np.random.Generator(np.random.Philox(410))
    samples = separable_samples(rng, n_per_class=6)
    clf = DualChannelClassifier(hidden_dim=16, epochs=3, batch_size=8,
                                pooling="global_attention").fit(samples)
    path = tmp_path / "model.npz"
    clf.save(path)
    loaded = DualChannelClassifier.load(path)
    assert np.array_equal(clf.predict_proba(samples), loaded.predict_proba(samples))
    assert loaded.get_params() == clf.get_params()


def test_checkpoint_shape_validation(tmp_path):
    rng = np.random.Generator(np.random.Philox(411))
    samples = separable_samples(rng, n_per_class=4)
    clf = DualChannelClassifier(hidden_dim=16, epochs=1, batch_size=8).fit(samples)
    path = tmp_path / "model.npz"
    clf.save(path)

    import json as jsonlib

    archive = dict(np.load(path))
    meta = jsonlib.loads(archive["__meta__"].tobytes().decode())
    meta["shapes"]["head.W"] = [1, 1]
    archive["__meta__"] = np.frombuffer(jsonlib.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **archive)
    with pytest.raises(ValueError, match="shape table"):
        DualChannelClassifier.load(path)


def test_unfitted_predict_raises():
    from sklearn.exceptions import NotFittedError

    rng = np.random.Generator(np.random.Philox(412))
    with pytest.raises(NotFittedError):
        DualChannelClassifier().predict([random_sample(rng)])
