#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "asolv/family.hpp"
#include "common.hpp"

using namespace asolv;
using testutil::near;

namespace {

const testutil::Loaded& riccati() {
    static testutil::Loaded L = testutil::load_fixture("riccati.json");
    return L;
}

const testutil::Loaded& oscillator() {
    static testutil::Loaded L = testutil::load_fixture("oscillator.json");
    return L;
}

const testutil::Loaded& pendulum() {
    static testutil::Loaded L = testutil::load_fixture("pendulum-eq.json");
    return L;
}

Box box1(double lo, double hi) { return Box{{{lo, hi}}}; }

// f = 0, X = a1: a constant exact solution, the simplest invertible family.
FamilyModel constant_family() {
    SystemDef sys{1, 0.0, 1.0, {parse("0", 1)}, {}};
    AsymptoticFamily fam{{parse("a1", 1)}, box1(-2.0, 2.0), box1(-1.0, 1.0)};
    return FamilyModel(std::move(sys), std::move(fam));
}

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("residual of the quadratic family is alpha^2/t^4") {
    const auto& L = riccati();
    Eigen::VectorXd Y = L.model->residual(10.0, vec1(1.0));
    REQUIRE(Y.size() == 1);
    CHECK(near(Y[0], 1e-4, 1e-15));
    for (double t : {2.0, 5.0, 50.0})
        CHECK(near(L.model->residual(t, vec1(0.5)).norm(), 0.25 / std::pow(t, 4.0), 1e-15));
}

TEST_CASE("exact families have identically zero residual") {
    FamilyModel cf = constant_family();
    for (double t : {1.0, 3.0, 100.0}) CHECK(cf.residual(t, vec1(1.3)).norm() == 0.0);

    const auto& P = pendulum();
    for (double t : {1.0, 7.0, 300.0}) CHECK(P.model->residual(t, vec2(0.0, 0.0)).norm() == 0.0);
    CHECK(P.cond.exact_family);
}

TEST_CASE("parameter Jacobian by symbolic differentiation") {
    CHECK(near(riccati().model->jacobian(10.0, vec1(1.0))(0, 0), 0.01, 1e-15));

    // rotation family: J = [[cos t, sin t], [-sin t, cos t]], det = 1
    const auto& O = oscillator();
    for (double t : {1.0, 2.5, 40.0}) {
        Eigen::MatrixXd J = O.model->jacobian(t, vec2(0.3, -0.7));
        CHECK(near(J(0, 0), std::cos(t), 1e-14));
        CHECK(near(J(0, 1), std::sin(t), 1e-14));
        CHECK(near(J(1, 0), -std::sin(t), 1e-14));
        CHECK(near(J.determinant(), 1.0, 1e-14));
    }

    // identity family X = alpha
    SystemDef sys{2, 0.0, 1.0, {parse("0", 2), parse("0", 2)}, {}};
    AsymptoticFamily fam{{parse("a1", 2), parse("a2", 2)},
                         Box{{{-2.0, 2.0}, {-2.0, 2.0}}},
                         Box{{{-1.0, 1.0}, {-1.0, 1.0}}}};
    FamilyModel idm(std::move(sys), std::move(fam));
    CHECK(idm.jacobian(5.0, vec2(0.1, 0.2)).isIdentity(1e-15));
}

TEST_CASE("jacobian_inverse: LU with a determinant floor") {
    Eigen::MatrixXd one(1, 1);
    one << 0.01;
    CHECK(near(jacobian_inverse(one, 1e-12)(0, 0), 100.0, 1e-9));

    double t = 1.0;
    Eigen::MatrixXd rot(2, 2);
    rot << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    CHECK((jacobian_inverse(rot, 1e-12) - rot.transpose()).norm() < 1e-14);

    Eigen::MatrixXd sing(2, 2);
    sing << 1.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(jacobian_inverse(sing, 1e-12), SingularJacobian);
}

TEST_CASE("linearization is df/dx on the family") {
    CHECK(near(riccati().model->linearization(10.0, vec1(1.0))(0, 0), -0.22, 1e-14));

    Eigen::MatrixXd M0 = pendulum().model->linearization(3.0, vec2(0.0, 0.0));
    CHECK(near(M0(0, 0), 0.0, 1e-15));
    CHECK(near(M0(0, 1), 1.0, 1e-15));
    CHECK(near(M0(1, 0), -1.0, 1e-15));
    CHECK(near(M0(1, 1), 0.0, 1e-15));

    // constant-coefficient linear field: M0 == A everywhere
    SystemDef sys{2, 0.0, 1.0, {parse("2*x1 + 3*x2", 2), parse("x1 - x2", 2)}, {}};
    AsymptoticFamily fam{{parse("a1", 2), parse("a2", 2)},
                         Box{{{-2.0, 2.0}, {-2.0, 2.0}}},
                         Box{{{-1.0, 1.0}, {-1.0, 1.0}}}};
    FamilyModel lin(std::move(sys), std::move(fam));
    Eigen::MatrixXd A(2, 2);
    A << 2.0, 3.0, 1.0, -1.0;
    for (double t : {1.0, 10.0, 500.0})
        CHECK((lin.linearization(t, vec2(0.4, -0.9)) - A).norm() == 0.0);
}

TEST_CASE("nonlinear part is the quadratic-and-higher remainder of f") {
    const auto& L = riccati();
    // G(R) = -(X+R)^2 + X^2 + 2XR = -R^2, independent of t and alpha
    for (double t : {2.0, 10.0, 300.0})
        CHECK(near(L.model->nonlinear_part(t, vec1(0.7), vec1(0.1))[0], -0.01, 1e-14));
    CHECK(L.model->nonlinear_part(10.0, vec1(0.7), vec1(0.0)).norm() == 0.0);

    SystemDef sys{1, 0.0, 1.0, {parse("3*x1", 1)}, {}};
    AsymptoticFamily fam{{parse("a1", 1)}, box1(-2.0, 2.0), box1(-1.0, 1.0)};
    FamilyModel lin(std::move(sys), std::move(fam));
    // cancellation leaves rounding residue of order eps * |f|
    for (double r : {-0.5, 0.01, 2.0})
        CHECK(lin.nonlinear_part(5.0, vec1(0.2), vec1(r)).norm() <= 1e-14);
}

TEST_CASE("reduced matrix -J^{-1} d_alpha Y") {
    CHECK(near(riccati().model->reduced_matrix(10.0, vec1(1.0))(0, 0), -0.02, 1e-12));

    FamilyModel cf = constant_family();
    CHECK(cf.reduced_matrix(7.0, vec1(0.5)).norm() == 0.0);

    // cubic perturbation: every entry bounded by 3(|a1|+|a2|)^2 t^{-3}
    const auto& O = oscillator();
    Eigen::VectorXd a = vec2(0.8, -0.6);
    double amt = 3.0 * std::pow(std::fabs(a[0]) + std::fabs(a[1]), 2.0);
    for (double t : geometric_grid(1.0, 1e3, 60)) {
        double bound = amt * std::pow(t, -3.0);
        CHECK(O.model->reduced_matrix(t, a).cwiseAbs().maxCoeff() <= bound * (1.0 + 1e-12));
    }
}

TEST_CASE("Jacobian identity dJ/dt - t^k M0 J = d_alpha Y on all fixtures") {
    auto check_identity = [](const FamilyModel& model, const Eigen::VectorXd& alpha) {
        double k = model.system().k;
        for (double t : geometric_grid(model.system().t0, 1e3 * model.system().t0, 49)) {
            Eigen::MatrixXd lhs = model.jacobian_dt(t, alpha) -
                                  std::pow(t, k) * model.linearization(t, alpha) *
                                      model.jacobian(t, alpha);
            Eigen::MatrixXd rhs = model.d_alpha_residual(t, alpha);
            CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8);
        }
    };
    check_identity(*riccati().model, vec1(0.5));
    check_identity(*oscillator().model, vec2(1.0, -0.5));
    check_identity(*pendulum().model, vec2(0.0, 0.0));
    static testutil::Loaded boundary = testutil::load_fixture("failing-boundary.json");
    check_identity(*boundary.model, vec1(1.0));
}

TEST_CASE("forcing reproduces the closed-form integral") {
    const auto& L = riccati();
    // J^{-1} Y = alpha^2/t^2 integrates to Z(t) = alpha^2/t (tail closed
    // analytically past T_max)
    ForcingResult fr = forcing(*L.model, vec1(1.0), 10.0, 1e5, 800, {}, FitMode::Auto,
                               L.sopt.det_floor);
    CHECK(near(fr.Z(10.0)[0], 0.1, 1e-8));
    CHECK(near(fr.Z(1000.0)[0], 1e-3, 1e-9));
    CHECK(near(fr.integrand_slope, -2.0, 0.01));
    CHECK(fr.tail_bound < 2e-5);
}

TEST_CASE("zero residual forces Z identically zero") {
    FamilyModel cf = constant_family();
    ForcingResult fr = forcing(cf, vec1(0.9), 1.0, 1e4, 100, {});
    for (const auto& v : fr.Z.values()) CHECK(v.norm() == 0.0);
    CHECK(fr.tail_bound == 0.0);
}

TEST_CASE("forcing is linear in the residual") {
    const auto& L = riccati();
    ForcingResult base = forcing(*L.model, vec1(0.5), 10.0, 1e4, 200, {}, FitMode::Auto,
                                 L.sopt.det_floor, 1.0);
    ForcingResult scaled = forcing(*L.model, vec1(0.5), 10.0, 1e4, 200, {}, FitMode::Auto,
                                   L.sopt.det_floor, 3.75);
    for (std::size_t i = 0; i < base.Z.size(); ++i) {
        double want = 3.75 * base.Z.values()[i][0];
        CHECK(near(scaled.Z.values()[i][0], want, 1e-10 * std::fabs(want) + 1e-18));
    }
}

TEST_CASE("oscillatory forcing decays at order two in envelope") {
    const auto& O = oscillator();
    QuadratureSpec quad;
    quad.phase_scale = 1.0;
    ForcingResult fr = forcing(*O.model, vec2(1.0, 0.0), 32.0, 3200.0, 400, quad,
                               FitMode::Envelope, O.sopt.det_floor);
    std::vector<double> ts, gs;
    for (std::size_t i = 0; i < fr.Z.size(); ++i) {
        ts.push_back(fr.Z.times()[i]);
        gs.push_back(fr.Z.values()[i].norm());
    }
    ExponentFit fit = fit_loglog(ts, gs, FitMode::Envelope);
    CHECK(near(fit.slope, -2.0, 0.1));
    // |Z| <= c/t^2 on the grid with the fitted constant
    double c = std::exp(fit.intercept);
    for (std::size_t i = 0; i < ts.size(); ++i)
        CHECK(gs[i] <= 1.2 * c * std::pow(ts[i], -2.0));
}

TEST_CASE("non-integrable residual is rejected") {
    // X = a1/t + 1/log(t) leaves J^{-1} Y ~ -1/log(t)^2, far above the
    // t^{-1} integrability threshold
    SystemDef sys{1, 0.0, 2.0, {parse("0", 1)}, {}};
    AsymptoticFamily fam{{parse("a1/t + 1/log(t)", 1)}, box1(-2.0, 2.0), box1(-1.0, 1.0)};
    FamilyModel slow(std::move(sys), std::move(fam));
    CHECK_THROWS_AS(forcing(slow, vec1(1.0), 10.0, 1e5, 100, {}), NonConvergentTail);
}

TEST_CASE("box containment") {
    Box outer{{{-2.0, 2.0}, {-1.0, 1.0}}};
    Box inner{{{-1.0, 1.0}, {-0.5, 0.5}}};
    CHECK(outer.strictly_contains(inner));
    CHECK_FALSE(inner.strictly_contains(outer));
    CHECK_FALSE(outer.strictly_contains(outer)); // needs positive margin
    CHECK(outer.contains(vec2(1.5, 0.0)));
    CHECK_FALSE(outer.contains(vec2(1.5, 1.5)));
    CHECK(near(inner.center()[0], 0.0, 1e-15));
}
