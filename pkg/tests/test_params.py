import pytest

from savcast.params import ParamError, ParamSet, parse_params_text


def test_defaults_validate():
    ParamSet().validate()


def test_segment_shares_must_sum_to_one():
    p = ParamSet(x_i=[0.5, 0.2, 0.2, 0.0])
    with pytest.raises(ParamError, match="x_i"):
        p.validate()


def test_segment_shares_tolerance():
    ParamSet(x_i=[0.66, 0.0, 0.34 + 5e-10, 0.0]).validate()
    with pytest.raises(ParamError):
        ParamSet(x_i=[0.66, 0.0, 0.34 + 5e-9, 0.0]).validate()


def test_negative_share_rejected():
    with pytest.raises(ParamError):
        ParamSet(x_i=[1.2, -0.2, 0.0, 0.0]).validate()


def test_unknown_key_rejected():
    with pytest.raises(ParamError, match="unknown parameter"):
        parse_params_text("no_such_param = 3\n")


def test_duplicate_key_rejected():
    with pytest.raises(ParamError, match="duplicate"):
        parse_params_text("M = 1\nM = 2\n")


def test_malformed_line_reports_lineno():
    with pytest.raises(ParamError, match=":2:"):
        parse_params_text("M = 12000\nthis is not a key value pair\n")


def test_bad_value_reports_key():
    with pytest.raises(ParamError, match="wait_cap"):
        parse_params_text("wait_cap = sixty\n")


def test_comments_and_blanks_ignored():
    vals = parse_params_text("# header\n\nM = 9000  # inline\n")
    assert vals == {"M": 9000.0}


def test_list_parsing():
    vals = parse_params_text("x_i = 0.5, 0.1, 0.4, 0\n")
    assert vals["x_i"] == [0.5, 0.1, 0.4, 0.0]


def test_headway_ordering_enforced():
    with pytest.raises(ParamError, match="headways"):
        ParamSet(h_SS=2.0, h_SH=1.4, h_HH=1.8).validate()


def test_lambda_range():
    with pytest.raises(ParamError):
        ParamSet(lambda_A=0.0).validate()
    with pytest.raises(ParamError):
        ParamSet(lambda_A=1.5).validate()


def test_table_parameters_load_from_file():
    eps = ", ".join(str(100 + a) for a in range(31))
    surv = ", ".join("0.9" for _ in range(31))
    vals = parse_params_text(f"eps_a = {eps}\nhv_survival = {surv}\n")
    assert len(vals["eps_a"]) == 31 and vals["eps_a"][5] == 105.0
    ParamSet(eps_a=vals["eps_a"], hv_survival=vals["hv_survival"]).validate()
