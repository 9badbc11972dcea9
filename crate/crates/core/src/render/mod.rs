//! CPU splatting renderer.

mod camera;
mod image;
pub mod metrics;
pub mod raster;

pub use camera::{Camera, DEFAULT_NEAR};
pub use image::Image;
pub use metrics::{psnr, rendering_loss, ssim};
pub use raster::{project_gaussian, PreparedGaussian, Projection, Splat};

/// Tile rasterizer over already prepared Gaussians.
pub fn render_gaussians(gaussians: &[PreparedGaussian], cam: &Camera, background: [f64; 3]) -> Image {
    raster::rasterize(raster::make_splats(gaussians, cam), cam, background).image
}

/// Brute-force oracle over already prepared Gaussians.
pub fn render_gaussians_brute(gaussians: &[PreparedGaussian], cam: &Camera, background: [f64; 3]) -> Image {
    raster::rasterize_brute(&raster::make_splats(gaussians, cam), cam, background)
}
