//! Color types, sRGB <-> CIELab conversion (D65, 2° observer) and the
//! CIEDE2000 color difference.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ColorParseError;

/// D65 reference white, 2° standard observer.
const WHITE_X: f64 = 0.95047;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.08883;

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

/// A CIELab color. `l` is lightness in `[0, 100]`; `a` and `b` are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    pub fn chroma(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// Hue angle in degrees, `[0, 360)`.
    pub fn hue_degrees(&self) -> f64 {
        let h = self.b.atan2(self.a).to_degrees();
        if h < 0.0 {
            h + 360.0
        } else {
            h
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l.is_finite() && self.a.is_finite() && self.b.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Snap to the nearest displayable color: inverse transform, clamp per
    /// channel, convert back.
    pub fn displayable(self) -> Self {
        rgb_to_lab(lab_to_rgb_clamped(self))
    }

    pub fn to_hex(self) -> String {
        lab_to_rgb_clamped(self).to_hex()
    }
}

/// An 8-bit sRGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RgbColor {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl RgbColor {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    /// `#RRGGBB`, uppercase.
    pub fn to_hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }

    pub fn to_lab(self) -> LabColor {
        rgb_to_lab(self)
    }
}

impl fmt::Display for RgbColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for RgbColor {
    type Err = ColorParseError;

    /// Accepts `#RRGGBB` in either case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix('#')
            .ok_or_else(|| ColorParseError(s.to_string()))?;
        if hex.len() != 6 || !hex.bytes().all(|c| c.is_ascii_hexdigit()) {
            return Err(ColorParseError(s.to_string()));
        }
        let channel = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).unwrap();
        Ok(Self::new(channel(0), channel(2), channel(4)))
    }
}

impl Serialize for RgbColor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for RgbColor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde adapter that stores an optional [`LabColor`] as `"#RRGGBB"` or `null`.
pub mod hex_lab_opt {
    use super::*;

    pub fn serialize<S: Serializer>(c: &Option<LabColor>, s: S) -> Result<S::Ok, S::Error> {
        match c {
            Some(c) => s.serialize_some(&c.to_hex()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<LabColor>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| {
            s.parse::<RgbColor>()
                .map(rgb_to_lab)
                .map_err(serde::de::Error::custom)
        })
        .transpose()
    }
}

/// Serde adapter that stores a [`LabColor`] as `"#RRGGBB"`.
pub mod hex_lab {
    use super::*;

    pub fn serialize<S: Serializer>(c: &LabColor, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&c.to_hex())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<LabColor, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<RgbColor>()
            .map(rgb_to_lab)
            .map_err(serde::de::Error::custom)
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    let t3 = t * t * t;
    if t3 > LAB_EPSILON {
        t3
    } else {
        (116.0 * t - 16.0) / LAB_KAPPA
    }
}

pub fn rgb_to_lab(c: RgbColor) -> LabColor {
    let r = srgb_to_linear(c.r as f64 / 255.0);
    let g = srgb_to_linear(c.g as f64 / 255.0);
    let b = srgb_to_linear(c.b as f64 / 255.0);

    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);

    LabColor {
        l: (116.0 * fy - 16.0).clamp(0.0, 100.0),
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

pub fn lab_to_rgb_clamped(c: LabColor) -> RgbColor {
    let fy = (c.l + 16.0) / 116.0;
    let fx = fy + c.a / 500.0;
    let fz = fy - c.b / 200.0;

    let x = lab_f_inv(fx) * WHITE_X;
    let y = lab_f_inv(fy) * WHITE_Y;
    let z = lab_f_inv(fz) * WHITE_Z;

    let r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    let g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    let b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;

    let to_u8 = |v: f64| {
        let v = linear_to_srgb(v.clamp(0.0, 1.0)) * 255.0;
        if v.is_finite() {
            v.round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    };
    RgbColor::new(to_u8(r), to_u8(g), to_u8(b))
}

/// CIEDE2000 color difference with kL = kC = kH = 1.
pub fn ciede2000(x: LabColor, y: LabColor) -> f64 {
    let c1 = x.chroma();
    let c2 = y.chroma();
    let c_bar = 0.5 * (c1 + c2);
    let c_bar7 = c_bar.powi(7);
    let g = 0.5 * (1.0 - (c_bar7 / (c_bar7 + 25f64.powi(7))).sqrt());

    let a1p = (1.0 + g) * x.a;
    let a2p = (1.0 + g) * y.a;
    let c1p = a1p.hypot(x.b);
    let c2p = a2p.hypot(y.b);

    let hue = |b: f64, ap: f64| {
        if b == 0.0 && ap == 0.0 {
            0.0
        } else {
            let h = b.atan2(ap).to_degrees();
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1p = hue(x.b, a1p);
    let h2p = hue(y.b, a2p);

    let dl = y.l - x.l;
    let dc = c2p - c1p;
    let chroma_product = c1p * c2p;
    let dh_angle = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh = 2.0 * chroma_product.sqrt() * (dh_angle.to_radians() / 2.0).sin();

    let l_bar = 0.5 * (x.l + y.l);
    let cp_bar = 0.5 * (c1p + c2p);
    let hp_bar = if chroma_product == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        0.5 * (h1p + h2p)
    } else if h1p + h2p < 360.0 {
        0.5 * (h1p + h2p + 360.0)
    } else {
        0.5 * (h1p + h2p - 360.0)
    };

    let t = 1.0 - 0.17 * (hp_bar - 30.0).to_radians().cos()
        + 0.24 * (2.0 * hp_bar).to_radians().cos()
        + 0.32 * (3.0 * hp_bar + 6.0).to_radians().cos()
        - 0.20 * (4.0 * hp_bar - 63.0).to_radians().cos();
    let d_theta = 30.0 * (-((hp_bar - 275.0) / 25.0).powi(2)).exp();
    let cp_bar7 = cp_bar.powi(7);
    let rc = 2.0 * (cp_bar7 / (cp_bar7 + 25f64.powi(7))).sqrt();
    let l50 = (l_bar - 50.0).powi(2);
    let sl = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let sc = 1.0 + 0.045 * cp_bar;
    let sh = 1.0 + 0.015 * cp_bar * t;
    let rt = -(2.0 * d_theta).to_radians().sin() * rc;

    let tl = dl / sl;
    let tc = dc / sc;
    let th = dh / sh;
    (tl * tl + tc * tc + th * th + rt * tc * th).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn white_and_black() {
        let w = rgb_to_lab(RgbColor::new(255, 255, 255));
        assert_abs_diff_eq!(w.l, 100.0, epsilon = 1e-3);
        assert_abs_diff_eq!(w.a, 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(w.b, 0.0, epsilon = 1e-3);
        assert_eq!(rgb_to_lab(RgbColor::new(0, 0, 0)), LabColor::new(0.0, 0.0, 0.0));
        assert_eq!(
            lab_to_rgb_clamped(LabColor::new(100.0, 0.0, 0.0)),
            RgbColor::new(255, 255, 255)
        );
    }

    #[test]
    fn pure_red_matches_reference() {
        // Reference from an independent sRGB->Lab calculator (D65/2°).
        let red = rgb_to_lab(RgbColor::new(255, 0, 0));
        assert_abs_diff_eq!(red.l, 53.24, epsilon = 0.005);
        assert_abs_diff_eq!(red.a, 80.09, epsilon = 0.005);
        assert_abs_diff_eq!(red.b, 67.20, epsilon = 0.005);
    }

    #[test]
    fn round_trip_sample_and_out_of_gamut() {
        let c = RgbColor::new(10, 200, 30);
        assert_eq!(lab_to_rgb_clamped(rgb_to_lab(c)), c);
        // Clamping contract: any finite Lab maps to a valid u8 triple.
        let _ = lab_to_rgb_clamped(LabColor::new(50.0, 120.0, -120.0));
        let _ = lab_to_rgb_clamped(LabColor::new(-20.0, 500.0, 500.0));
    }

    #[test]
    fn hex_parsing() {
        assert_eq!("#ff8000".parse::<RgbColor>().unwrap(), RgbColor::new(255, 128, 0));
        assert_eq!(RgbColor::new(255, 128, 0).to_hex(), "#FF8000");
        for bad in ["ff8000", "#ff800", "#gg8000", "#ff80000", ""] {
            assert!(bad.parse::<RgbColor>().is_err(), "{bad}");
        }
    }

    #[test]
    fn identical_colors_have_zero_difference() {
        let c = LabColor::new(42.0, -13.0, 27.5);
        assert_eq!(ciede2000(c, c), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100_000))]
        #[test]
        fn rgb_lab_round_trip(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
            let c = RgbColor::new(r, g, b);
            let back = lab_to_rgb_clamped(rgb_to_lab(c));
            prop_assert!((back.r as i16 - r as i16).abs() <= 1);
            prop_assert!((back.g as i16 - g as i16).abs() <= 1);
            prop_assert!((back.b as i16 - b as i16).abs() <= 1);
        }
    }

    proptest! {
        #[test]
        fn ciede2000_symmetric_non_negative(
            l1 in 0.0..100.0f64, a1 in -128.0..128.0f64, b1 in -128.0..128.0f64,
            l2 in 0.0..100.0f64, a2 in -128.0..128.0f64, b2 in -128.0..128.0f64,
        ) {
            let x = LabColor::new(l1, a1, b1);
            let y = LabColor::new(l2, a2, b2);
            let d = ciede2000(x, y);
            prop_assert!(d >= 0.0);
            prop_assert!((d - ciede2000(y, x)).abs() < 1e-9);
        }
    }
}
