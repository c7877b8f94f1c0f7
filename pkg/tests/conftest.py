import numpy as np
import pytest

import seeiirfit as sf

SEASON_CAL = sf.HolidayCalendar(((77, 91), (133, 137)))


@pytest.fixture
def holiday_cal():
    return SEASON_CAL


@pytest.fixture
def reference_params():
    """A realistic supercritical season used by integration-level tests."""
    return sf.EpiParams(pi=0.45, i_tot0=4000.0, beta=0.75, kappa=1.2)


def make_empty_series(n_weeks=33, start_year=2016, calendar=SEASON_CAL):
    """A season window with every count missing (prior-only likelihood)."""
    years, weeks = [], []
    y, w = start_year, 40
    for _ in range(n_weeks):
        years.append(y)
        weeks.append(w)
        y, w = (y, w + 1) if w < sf.data.iso_weeks_in_year(y) else (y + 1, 1)
    return sf.SurveillanceSeries(iso_years=years, iso_weeks=weeks,
                                 counts=[np.nan] * n_weeks, calendar=calendar)


@pytest.fixture
def empty_series():
    return make_empty_series()


def median_truth_scenario(seed=100):
    """Season generated at the informative-scenario prior medians."""
    const = sf.EpiConstants()
    return sf.Scenario(
        params=const.epi_params(0.401, 5000.0, 0.56, 1.0),
        obs=sf.ObsParams(p_icu=0.000239, eta=50.5),
        calendar=SEASON_CAL,
        season_weeks=33,
        seed=seed,
    )


def realistic_scenario(seed=11):
    """A clearly supercritical season with a mid-season peak."""
    const = sf.EpiConstants()
    return sf.Scenario(
        params=const.epi_params(0.45, 4000.0, 0.75, 1.2),
        obs=sf.ObsParams(p_icu=0.0009, eta=3.0),
        calendar=SEASON_CAL,
        season_weeks=33,
        seed=seed,
    )


@pytest.fixture(scope="session")
def small_fit():
    """One short informative fit on realistic data, shared by API-level tests."""
    sc = realistic_scenario()
    series, truth = sf.simulate_series(sc)
    draws = sf.mh_sample(series, sf.PriorSpec.named("informative"),
                         cal=sc.calendar, kernel=sc.kernel,
                         n_iter=4000, n_chains=2, seed=21,
                         burn_in=1000, thinning=10)
    return {"scenario": sc, "series": series, "truth": truth, "draws": draws}
