//! Printed approximation tables, coefficients in ascending powers.

/// (degree, interval half-width, coefficients) for ReLU.
pub const RELU: [(usize, f64, &[f64]); 8] = [
    (3, 10.0, &[1.35299025036549, 0.5, 0.038268343236509, -4.44089209850063e-18]),
    (5, 10.0, &[0.862730150341736, 0.5, 0.0660873211772537, -2.90138283768708e-17, -0.000252624921308674, 2.368475785867e-19]),
    (7, 10.0, &[
        0.637244473880199, 0.5, 0.0920352084972136, -5.24025267623074e-17, -0.000847927183186682,
        1.33226762955019e-18, 3.66197231323541e-6, -8.88178419700125e-21,
    ]),
    (9, 10.0, &[
        0.506232562894004, 0.5, 0.117284304779533, -4.21263024463769e-16, -0.00189480875502865,
        1.66338054441439e-17, 1.87324195121527e-5, -2.41868747252738e-19, -7.03111115816643e-8,
        1.15960574476048e-21,
    ]),
    (3, 100.0, &[13.5299025036549, 0.5, 0.0038268343236509, -4.2632564145606e-20]),
    (5, 100.0, &[8.62730150341737, 0.5, 0.00660873211772537, -2.70006239588838e-19, -2.52624921308674e-7, 2.27373675443232e-23]),
    (7, 100.0, &[
        6.37244473880199, 0.5, 0.00920352084972135, -4.2277292777726e-19, -8.47927183186682e-7,
        1.03739239420975e-22, 3.6619723132354e-11, -6.82121026329696e-27,
    ]),
    (9, 100.0, &[
        5.06232562894004, 0.5, 0.0117284304779533, -4.11404244005098e-18, -1.89480875502865e-6,
        1.62231117428746e-21, 1.87324195121527e-10, -2.35559127759188e-25, -7.03111115816644e-15,
        1.12777343019843e-29,
    ]),
];

/// (degree, interval half-width, coefficients) for the sigmoid.
pub const SIGMOID: [(usize, f64, &[f64]); 8] = [
    (3, 10.0, &[0.499999999992724, 0.139786538317376, 1.45518367592346e-13, -0.00100377373568484]),
    (5, 10.0, &[
        0.500000000006453, 0.187819515164365, -5.65619279205865e-13, -0.00336794817488311, 5.82078097744257e-15,
        2.0467424332792e-5,
    ]),
    (7, 10.0, &[
        0.500000000015461, 0.216030242339756, -3.00134166245124e-12, -0.00652613009889838, 8.44014964905896e-14,
        9.18419138902492e-5, -5.82079696725621e-16, -4.34913635838155e-7,
    ]),
    (9, 10.0, &[
        0.500000000005353, 0.231624826001611, -2.49775180627496e-12, -0.0097848700927233, 1.47390762630842e-13,
        0.000229352354062705, -2.60854055994519e-15, -2.42773327147286e-6, 1.39698499452418e-17,
        9.32721914680041e-9,
    ]),
    (3, 100.0, &[0.49999999999999996519, 0.014650756326574837423, 6.9623566103164815542e-21, -1.082392200292393945e-6]),
    (5, 100.0, &[
        0.500000000006453, 0.0221378748242352, -5.65616515992073e-15, -4.39372964314194e-6, 5.82075253629132e-19,
        2.76073648126615e-10,
    ]),
    (7, 100.0, &[
        0.500000000015461, 0.029595343798993, -3.00133479250796e-14, -1.10438386427853e-5, 8.44011305257745e-18,
        1.66796555589344e-9, -5.82076636528339e-22, -8.15672916212668e-14,
    ]),
    (9, 100.0, &[
        0.500000000005353, 0.0370400456474675, -2.49774773767457e-14, -2.21440994162872e-5, 1.47390439498889e-17,
        5.85712544194627e-9, -2.60853504193157e-21, -6.55008389245384e-13, 1.3969822658824e-25,
        2.59190909648308e-17,
    ]),
];

/// Anchors on [-5, 5]: (x, f(x), printed approximation).
pub const SIGMOID_ANCHORS: [(f64, f64, f64); 8] = [
    (-4.0, 0.017986, 0.016360),
    (-3.0, 0.047426, 0.049098),
    (-2.0, 0.119203, 0.118340),
    (-1.0, 0.268941, 0.268522),
    (1.0, 0.731059, 0.731478),
    (2.0, 0.880797, 0.881660),
    (3.0, 0.952574, 0.950902),
    (4.0, 0.982014, 0.983640),
];

pub const RELU_ANCHORS: [(f64, f64, f64); 8] = [
    (-4.0, 0.0, -0.008871),
    (-3.0, 0.0, 0.014340),
    (-2.0, 0.0, -0.015085),
    (-1.0, 0.0, -0.026883),
    (1.0, 1.0, 0.973117),
    (2.0, 2.0, 1.984915),
    (3.0, 3.0, 3.014340),
    (4.0, 4.0, 3.991129),
];

/// Horner evaluation of ascending coefficients.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}
