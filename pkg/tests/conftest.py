import pytest

from pbslab import (Beta, CandlestickConfig, HybridAuctionConfig, PriceProcess,
                    Uniform, solve_candlestick, solve_fixed_point, solve_ode)

UNIT = Uniform(0.0, 1.0)


@pytest.fixture(scope="session")
def uniform_3_1():
    config = HybridAuctionConfig(3, 1, UNIT, UNIT)
    return config, solve_fixed_point(config)

@pytest.fixture(scope="session")
def uniform_3_3():
    config = HybridAuctionConfig(3, 3, UNIT, UNIT)
    return config, solve_fixed_point(config)


@pytest.fixture(scope="session")
def uniform_3_3_ode(uniform_3_3):
    config, _ = uniform_3_3
    return solve_ode(config)


@pytest.fixture(scope="session")
def beta_3_3():
    config = HybridAuctionConfig(3, 3, Beta(2, 2), Beta(2, 2))
    return config, solve_fixed_point(config)


@pytest.fixture(scope="session")
def beta_3_3_ode(beta_3_3):
    config, _ = beta_3_3
    return solve_ode(config)


@pytest.fixture(scope="session")
def candlestick_half():
    config = CandlestickConfig(PriceProcess(1.0, 0.2, 1.0), 0.5)
    return config, solve_candlestick(config)
