from kinforest.training.gradient_suite import SUITE_CONFIG, TOLERANCE, check_model_gradients


class TestGradientSuite:

    def test_full_model_gradients_agree_with_central_differences(self):
        result = check_model_gradients(seed=0)
        assert result.passed, result.report
        assert result.report.max_relative_error < TOLERANCE

    def test_every_parameter_tensor_is_checked(self):
        result = check_model_gradients(seed=1, coords_per_param=2)
        assert "center.C" in result.report.per_parameter
        assert f"forest.layer{SUITE_CONFIG.layers}.E" in result.report.per_parameter
        assert "family.part1.W" in result.report.per_parameter
        assert result.report.checked <= 2 * len(result.report.per_parameter)
