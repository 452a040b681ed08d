use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::time::{timeout, Instant};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use dgui::input::Status;
use dgui::sim::SceneConfig;
use dgui_service::protocol::{decode_server, encode_client};
use dgui_service::{serve_on, ClientMessage, ControlCmd, EventBody, GazeWire, ServeOptions, ServerMessage, StateFrame};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(options: ServeOptions) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/scene.json");
    let scene = SceneConfig::load(path).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve_on(listener, scene, options));
    format!("ws://{addr}/session")
}

async fn recv(ws: &mut Ws) -> ServerMessage {
    loop {
        let m = timeout(Duration::from_secs(5), ws.next()).await.expect("server went quiet").unwrap().unwrap();
        if let Message::Text(t) = m {
            let value: serde_json::Value = serde_json::from_str(t.as_str()).unwrap();
            assert_eq!(value["v"], 1, "every message carries v:1");
            return decode_server(t.as_str()).unwrap();
        }
    }
}

async fn next_state(ws: &mut Ws) -> StateFrame {
    loop {
        if let ServerMessage::State(s) = recv(ws).await {
            return s;
        }
    }
}

async fn send(ws: &mut Ws, msg: &ClientMessage) {
    ws.send(Message::Text(encode_client(msg).into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn fixating_an_arrow_moves_the_arm() {
    let url = start(ServeOptions::default()).await;
    let (mut owner, _) = connect_async(&url).await.unwrap();
    assert_eq!(recv(&mut owner).await, ServerMessage::Welcome { gaze_owner: true });
    let (mut observer, _) = connect_async(&url).await.unwrap();
    assert_eq!(recv(&mut observer).await, ServerMessage::Welcome { gaze_owner: false });

    let mut state = next_state(&mut owner).await;
    while state.zones.is_empty() {
        state = next_state(&mut owner).await;
    }
    let c = state.zones.iter().find(|z| z.button_id == "move_up").unwrap().centroid();
    let gaze = ClientMessage::Gaze {
        gaze: GazeWire {
            u: c.x,
            v: c.y,
            valid: true,
        },
    };

    let start = Instant::now();
    let mut last_frame = state.frame;
    let mut moved = false;
    let mut activated = false;
    while start.elapsed() < Duration::from_millis(1000) {
        send(&mut owner, &gaze).await;
        match recv(&mut owner).await {
            ServerMessage::State(s) => {
                assert!(s.frame > last_frame, "frame counter must strictly increase");
                last_frame = s.frame;
                let up = s.activations.iter().find(|a| a.button_id == "move_up").unwrap();
                if up.status == Status::Active && s.velocity[2] > 0.0 {
                    moved = true;
                }
            }
            ServerMessage::Event(EventBody::Input(e)) if e.button_id == "move_up" => activated = true,
            _ => {}
        }
    }
    assert!(activated, "no activation event for the fixated button");
    assert!(moved, "state frames never showed upward velocity");

    // Observers are read-only, and bad frames get an error without a disconnect.
    send(&mut observer, &gaze).await;
    observer.send(Message::Text(r#"{"v":1,"type":"teleport"}"#.into())).await.unwrap();
    let mut errors = 0;
    while errors < 2 {
        if let ServerMessage::Error { .. } = recv(&mut observer).await {
            errors += 1;
        }
    }
    let s = next_state(&mut observer).await;
    assert!(s.frame > 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn estop_clear_releases_the_latch() {
    let url = start(ServeOptions {
        inject_estop_at_ms: Some(200),
    })
    .await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    assert_eq!(recv(&mut ws).await, ServerMessage::Welcome { gaze_owner: true });
    while !next_state(&mut ws).await.estop {}
    send(&mut ws, &ClientMessage::Control { cmd: ControlCmd::EstopClear }).await;
    let mut cleared_event = false;
    loop {
        match recv(&mut ws).await {
            ServerMessage::Event(EventBody::Estop { latched: false, .. }) => cleared_event = true,
            ServerMessage::State(s) if cleared_event => {
                assert!(!s.estop);
                break;
            }
            _ => {}
        }
    }
    for _ in 0..5 {
        assert!(!next_state(&mut ws).await.estop);
    }
}
