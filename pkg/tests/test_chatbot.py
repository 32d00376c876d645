import numpy as np
import pytest
from hypothesis import given, strategies as st

from infoagg.chatbot import (AffineQuery, ChatbotConfig, LogisticQuery, chatbot_answers,
                             chatbot_demo)
from infoagg.errors import InversionConditioningError, NonInvertibleQueryMap
from infoagg.params import ModelParams


def test_affine_example():
    f = AffineQuery(2.0, 1.0)
    assert f.forward(0.7) == pytest.approx(2.4, abs=1e-15)
    assert abs(f.inverse(f.forward(0.7)) - 0.7) <= 1e-12


@given(st.floats(-0.5, 0.5).filter(lambda v: abs(v) > 1e-3), st.floats(-10, 10),
       st.floats(-50, 50))
def test_affine_round_trip(p, q, x):
    f = AffineQuery(p, q)
    assert abs(f.inverse(f.forward(x)) - x) <= 1e-12 * max(1.0, abs(x), abs(q / p))


def test_affine_needs_slope():
    with pytest.raises(NonInvertibleQueryMap):
        AffineQuery(0.0, 1.0).check()


@given(st.floats(-100, 100))
def test_logistic_round_trip_in_range(x):
    f = LogisticQuery(scale=10.0)
    assert abs(f.inverse(f.forward(x)) - x) <= 1e-9


def test_logistic_out_of_range():
    with pytest.raises(InversionConditioningError):
        LogisticQuery(scale=1.0).forward(np.array([0.0, 31.0]))
    with pytest.raises(NonInvertibleQueryMap):
        LogisticQuery(scale=0.0).check()


def test_theta_recovered_at_clt_rate():
    cfg = ChatbotConfig(n_agents=1_000_000, theta=5.0)
    inside = 0
    for t in range(100):
        rep = chatbot_demo(cfg, trial=t)
        assert rep.max_inversion_error <= 1e-12
        assert rep.clt_sd == pytest.approx(1e-3)
        inside += rep.abs_error <= 3 * rep.clt_sd
    assert inside >= 99


def test_answer_users_are_less_informed():
    rep = chatbot_demo(ChatbotConfig(n_agents=1000))
    assert rep.trader_variance > rep.chatbot_variance == 1.0


def test_noiseless_answers_reveal_theta():
    p = ModelParams(sigma_eps=0.0)
    cfg = ChatbotConfig(n_agents=1000, sigma_tau_answer=0.0, params=p, theta=1.5)
    assert np.all(chatbot_answers(cfg) == 1.5)
    rep = chatbot_demo(cfg)
    assert rep.trader_variance == pytest.approx(p.sigma_eta ** 2, abs=1e-15)


def test_answer_noise_structure():
    cfg = ChatbotConfig(n_agents=200_000, sigma_tau_answer=0.5, theta=2.0)
    ai = chatbot_answers(cfg, trial=3)
    # common eps shifts every answer alike; tau spreads them
    assert np.std(ai) == pytest.approx(0.5, rel=0.01)
