//! Daubechies extremal-phase filters.

use crate::error::{Error, Result};

const DB1: [f64; 2] = [
    0.7071067811865476,
    0.7071067811865476,
];

const DB2: [f64; 4] = [
    0.48296291314453416,
    0.8365163037378079,
    0.2241438680420134,
    -0.12940952255126037,
];

const DB3: [f64; 6] = [
    0.33267055295008263,
    0.8068915093110925,
    0.45987750211849154,
    -0.13501102001025458,
    -0.08544127388202666,
    0.03522629188570953,
];

const DB4: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];

const DB5: [f64; 10] = [
    0.16010239797419293,
    0.6038292697971896,
    0.7243085284377729,
    0.13842814590132074,
    -0.24229488706638203,
    -0.032244869584638375,
    0.07757149384004572,
    -0.006241490212798274,
    -0.012580751999081999,
    0.0033357252854737712,
];

const DB6: [f64; 12] = [
    0.11154074335010947,
    0.49462389039845306,
    0.7511339080210954,
    0.31525035170919763,
    -0.22626469396543983,
    -0.12976686756726194,
    0.09750160558732304,
    0.027522865530305727,
    -0.03158203931748603,
    0.0005538422011614961,
    0.004777257510945511,
    -0.0010773010853084796,
];

const DB7: [f64; 14] = [
    0.07785205408500918,
    0.3965393194819173,
    0.7291320908462351,
    0.4697822874051931,
    -0.14390600392856498,
    -0.22403618499387498,
    0.07130921926683026,
    0.08061260915108308,
    -0.03802993693501441,
    -0.01657454163066688,
    0.01255099855609984,
    0.0004295779729213665,
    -0.0018016407040474908,
    0.00035371379997452024,
];

const DB8: [f64; 16] = [
    0.05441584224310401,
    0.31287159091429995,
    0.6756307362972898,
    0.5853546836542067,
    -0.015829105256349306,
    -0.2840155429615469,
    0.0004724845739132828,
    0.12874742662047847,
    -0.017369301001807547,
    -0.044088253930794755,
    0.013981027917398282,
    0.008746094047405777,
    -0.004870352993451574,
    -0.00039174037337694705,
    0.0006754494064505693,
    -0.00011747678412476953,
];

/// Hölder exponents of the scaling functions, orders 1..=8.
const HOLDER: [f64; 8] = [0.0, 0.550, 1.088, 1.618, 1.969, 2.189, 2.460, 2.761];

/// Orders for which taps are embedded.
pub const SUPPORTED_ORDERS: std::ops::RangeInclusive<usize> = 1..=8;

/// Order used when none is configured: the shortest filter whose atoms are C¹.
pub const DEFAULT_ORDER: usize = 3;

/// Orthonormal two-channel filter pair of a Daubechies wavelet with `order` vanishing moments.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    pub order: usize,
    pub low_pass: Vec<f64>,
    /// `g_k = (−1)^k h_{L−k}`, so the mother wavelet shares the support `[0, L]` of the scaling function.
    pub high_pass: Vec<f64>,
    pub holder_exponent: f64,
}

impl WaveletFilter {
    pub fn new(order: usize) -> Result<Self> {
        let taps: &[f64] = match order {
            1 => &DB1,
            2 => &DB2,
            3 => &DB3,
            4 => &DB4,
            5 => &DB5,
            6 => &DB6,
            7 => &DB7,
            8 => &DB8,
            _ => {
                return Err(Error::Config(format!(
                    "wavelet order {order} is not available (supported: {}..={})",
                    SUPPORTED_ORDERS.start(),
                    SUPPORTED_ORDERS.end()
                )))
            }
        };
        let l = taps.len() - 1;
        let high_pass = (0..=l)
            .map(|k| if k % 2 == 0 { taps[l - k] } else { -taps[l - k] })
            .collect();
        Ok(Self {
            order,
            low_pass: taps.to_vec(),
            high_pass,
            holder_exponent: HOLDER[order - 1],
        })
    }

    /// Length `L = 2·order − 1` of the support `[0, L]` of both generators.
    pub fn support_length(&self) -> usize {
        self.low_pass.len() - 1
    }

    /// Number of continuous derivatives guaranteed by the Hölder exponent.
    pub fn regularity(&self) -> usize {
        self.holder_exponent.floor() as usize
    }
}

impl Default for WaveletFilter {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER).expect("default order is embedded")
    }
}
