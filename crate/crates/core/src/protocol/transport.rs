//! Framed, ordered message transports.
//!
//! Frame layout: 4-byte little-endian length, 1-byte message tag, 8-byte
//! sequence number, payload. The length counts everything after itself
//! (tag + sequence + payload).

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{Receiver, Sender};

use super::SessionError;

/// Hard cap on a single frame's payload, guarding against corrupt lengths.
pub const MAX_FRAME_BYTES: u32 = 1 << 28;

/// Raw frame as it travels on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub tag: u8,
    pub seq: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let len = 1 + 8 + self.payload.len();
        let mut out = Vec::with_capacity(4 + len);
        out.extend_from_slice(&(len as u32).to_le_bytes());
        out.push(self.tag);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

/// Blocking, ordered, reliable frame pipe.
pub trait Transport {
    fn send(&mut self, frame: &Frame) -> Result<(), SessionError>;
    fn recv(&mut self) -> Result<Frame, SessionError>;
}

/// In-process transport over a pair of channels.
pub struct LoopbackTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl LoopbackTransport {
    /// Connected pair of endpoints.
    pub fn pair() -> (Self, Self) {
        let (tx_a, rx_b) = std::sync::mpsc::channel();
        let (tx_b, rx_a) = std::sync::mpsc::channel();
        (Self { tx: tx_a, rx: rx_a }, Self { tx: tx_b, rx: rx_b })
    }
}

impl Transport for LoopbackTransport {
    fn send(&mut self, frame: &Frame) -> Result<(), SessionError> {
        self.tx
            .send(frame.encode())
            .map_err(|_| SessionError::Transport("peer hung up".into()))
    }

    fn recv(&mut self) -> Result<Frame, SessionError> {
        let bytes = self
            .rx
            .recv()
            .map_err(|_| SessionError::Transport("peer hung up".into()))?;
        decode_frame(&bytes)
    }
}

/// TCP transport with the standard framing.
pub struct TcpTransport {
    stream: TcpStream,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Self {
        Self { stream }
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, frame: &Frame) -> Result<(), SessionError> {
        self.stream
            .write_all(&frame.encode())
            .map_err(|e| SessionError::Transport(e.to_string()))
    }

    fn recv(&mut self) -> Result<Frame, SessionError> {
        let mut len_bytes = [0u8; 4];
        self.stream
            .read_exact(&mut len_bytes)
            .map_err(|e| SessionError::Transport(e.to_string()))?;
        let len = u32::from_le_bytes(len_bytes);
        if len < 9 || len > MAX_FRAME_BYTES {
            return Err(SessionError::Framing(format!("bad frame length {len}")));
        }
        let mut rest = vec![0u8; len as usize];
        self.stream
            .read_exact(&mut rest)
            .map_err(|e| SessionError::Transport(e.to_string()))?;
        let mut bytes = len_bytes.to_vec();
        bytes.extend_from_slice(&rest);
        decode_frame(&bytes)
    }
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame, SessionError> {
    if bytes.len() < 13 {
        return Err(SessionError::Framing("frame shorter than header".into()));
    }
    let len = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if len < 9 || len > MAX_FRAME_BYTES || bytes.len() != 4 + len as usize {
        return Err(SessionError::Framing(format!(
            "length field {len} does not match frame size {}",
            bytes.len()
        )));
    }
    let tag = bytes[4];
    let seq = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    Ok(Frame { tag, seq, payload: bytes[13..].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_encoding_layout() {
        let f = Frame { tag: 3, seq: 0x0102030405060708, payload: vec![0xaa, 0xbb] };
        let bytes = f.encode();
        assert_eq!(&bytes[0..4], &11u32.to_le_bytes());
        assert_eq!(bytes[4], 3);
        assert_eq!(&bytes[5..13], &0x0102030405060708u64.to_le_bytes());
        assert_eq!(&bytes[13..], &[0xaa, 0xbb]);
        assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn decode_rejects_corrupt_frames() {
        assert!(decode_frame(&[1, 2]).is_err());
        let mut bytes = Frame { tag: 1, seq: 0, payload: vec![] }.encode();
        bytes[0] = 200; // wrong length
        assert!(decode_frame(&bytes).is_err());
    }

    #[test]
    fn loopback_delivers_in_order() {
        let (mut a, mut b) = LoopbackTransport::pair();
        for seq in 0..5u64 {
            a.send(&Frame { tag: 1, seq, payload: vec![seq as u8] }).unwrap();
        }
        for seq in 0..5u64 {
            let f = b.recv().unwrap();
            assert_eq!(f.seq, seq);
            assert_eq!(f.payload, vec![seq as u8]);
        }
    }

    #[test]
    fn tcp_roundtrip() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let client = std::thread::spawn(move || {
            let stream = TcpStream::connect(addr).unwrap();
            let mut t = TcpTransport::new(stream);
            t.send(&Frame { tag: 7, seq: 1, payload: vec![1, 2, 3] }).unwrap();
            t.recv().unwrap()
        });
        let (stream, _) = listener.accept().unwrap();
        let mut t = TcpTransport::new(stream);
        let got = t.recv().unwrap();
        assert_eq!(got.payload, vec![1, 2, 3]);
        t.send(&Frame { tag: 8, seq: 2, payload: vec![9] }).unwrap();
        let back = client.join().unwrap();
        assert_eq!(back.tag, 8);
    }
}
