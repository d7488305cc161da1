//! Starts the HTTP service on 127.0.0.1:8080 with an untrained 64 px model.
//! Try:
//!
//!     curl localhost:8080/model-info
//!     curl 'localhost:8080/debug/radius?level=0.5'

use std::sync::Arc;

use candle_core::Device;
use sketchrefine::inference::Session;
use sketchrefine::nn::{Generator, NetworkConfig, Renderer, RendererConfig};
use sketchrefine::service::serve;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let g = Generator::new(&NetworkConfig::compact(64)?, 0, &Device::Cpu)?;
    let f = Renderer::new(&RendererConfig::new(64, 8)?, 1, &Device::Cpu)?;
    let session = Arc::new(Session::new(g, Some(f), 4.0)?);
    serve("127.0.0.1:8080".parse()?, session).await?;
    Ok(())
}
