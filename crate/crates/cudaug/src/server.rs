//! Transports for [`Session`]: stdio and TCP (one thread per connection).

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::thread;

use crate::protocol::Session;

/// Serve one session over a line stream until EOF. Blank lines are ignored.
pub fn serve_stream<R: BufRead, W: Write>(mut reader: R, mut writer: W) -> io::Result<()> {
    let mut session = Session::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        let line = String::from_utf8_lossy(&buf);
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let reply = session.handle_line(line);
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
}

pub fn serve_stdio() -> io::Result<()> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_stream(stdin.lock(), BufWriter::new(stdout.lock()))
}

pub fn bind(addr: impl ToSocketAddrs) -> io::Result<TcpListener> {
    TcpListener::bind(addr)
}

/// Accept connections forever, one session per connection.
pub fn serve_listener(listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        match stream {
            Ok(stream) => {
                thread::spawn(move || handle_connection(stream));
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
    Ok(())
}

fn handle_connection(stream: TcpStream) {
    let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into());
    log::info!("session opened: {peer}");
    let result = stream
        .try_clone()
        .and_then(|read_half| serve_stream(BufReader::new(read_half), BufWriter::new(stream)));
    match result {
        Ok(()) => log::info!("session closed: {peer}"),
        Err(e) => log::warn!("session {peer} ended: {e}"),
    }
}
