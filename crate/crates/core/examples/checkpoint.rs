//! Writes a network checkpoint, reads it back and checks the round trip.
//!
//! `cargo run --example checkpoint -- [path]`

use std::fs::File;
use std::io::BufReader;

use fracbsde::networks::checkpoint::{read_checkpoint, write_checkpoint};
use fracbsde::networks::{InitConfig, Network, NetworkKind};

fn main() -> fracbsde::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("lstm.ckpt").display().to_string());
    let net = Network::init(NetworkKind::Lstm, 2, 2, 11, &InitConfig::default())?;
    write_checkpoint(File::create(&path)?, &net, 6.3)?;

    let (back, y0) = read_checkpoint(BufReader::new(File::open(&path)?))?;
    let same = net.params().iter().zip(back.params()).all(|(a, b)| a.value == b.value);
    println!("wrote {path}: {} tensors, y0 = {y0}, exact round trip: {same}", back.params().len());
    Ok(())
}
