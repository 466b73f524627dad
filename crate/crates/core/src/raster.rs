//! Raster images and the data-element annotations that accompany them.

use std::io::Cursor;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::color::{rgb_to_lab, LabColor, RgbColor};
use crate::doc::{BBox, ElementType, VifType};
use crate::error::ExtractError;

/// Row-major sRGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<RgbColor>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<RgbColor>) -> Result<Self, ExtractError> {
        if pixels.len() != width as usize * height as usize {
            return Err(ExtractError::RasterSize {
                width,
                height,
                pixels: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: RgbColor) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[RgbColor] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> RgbColor {
        self.pixels[self.offset(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, c: RgbColor) {
        let i = self.offset(x, y);
        self.pixels[i] = c;
    }

    pub fn fill_rect(&mut self, bbox: BBox, c: RgbColor) {
        for y in bbox.y..bbox.bottom().min(self.height) {
            for x in bbox.x..bbox.right().min(self.width) {
                self.set(x, y, c);
            }
        }
    }

    pub fn bounds(&self) -> BBox {
        BBox::new(0, 0, self.width, self.height)
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn to_lab(&self) -> Vec<LabColor> {
        self.pixels.iter().map(|&c| rgb_to_lab(c)).collect()
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, ExtractError> {
        let img = image::load_from_memory(bytes)?.to_rgb8();
        let (width, height) = img.dimensions();
        let pixels = img
            .pixels()
            .map(|p| RgbColor::new(p[0], p[1], p[2]))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let raw: Vec<u8> = self.pixels.iter().flat_map(|c| [c.r, c.g, c.b]).collect();
        let img = RgbImage::from_raw(self.width, self.height, raw).expect("buffer size checked");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .expect("PNG encoding into memory");
        out.into_inner()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataElement {
    pub bbox: BBox,
    pub element_type: ElementType,
}

/// Output of an external data-element detector and visual-group builder.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationSet {
    #[serde(default)]
    pub data_elements: Vec<DataElement>,
    /// Explicit grouping: each inner list holds indices into `data_elements`,
    /// outer order is the backbone order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_groups: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vif_type: Option<VifType>,
}

impl AnnotationSet {
    pub fn validate(&self, img: &RasterImage) -> Result<(), ExtractError> {
        for (index, d) in self.data_elements.iter().enumerate() {
            let b = d.bbox;
            if b.w == 0 || b.h == 0 || !img.bounds().contains(&b) || !d.element_type.is_data() {
                return Err(ExtractError::AnnotationOutOfBounds {
                    index,
                    x: b.x,
                    y: b.y,
                    w: b.w,
                    h: b.h,
                    width: img.width(),
                    height: img.height(),
                });
            }
        }
        if let Some(groups) = &self.visual_groups {
            for &i in groups.iter().flatten() {
                if i >= self.data_elements.len() {
                    return Err(ExtractError::BadGroupMember(i));
                }
            }
        }
        Ok(())
    }
}
