use std::io::{BufReader, Write};
use std::thread;

use cxnprobe::affinity::{analyze, global_affinity, local_affinity};
use cxnprobe::gateway::protocol::{
    self, encode_log_probs, handle_request, read_frame, serve, write_frame, write_message, Request,
    RequestBody, Response, ResponseBody,
};
use cxnprobe::gateway::{DistributionRequest, Gateway, GatewayClient, GatewayError, MockGateway};

fn served(gw: MockGateway) -> GatewayClient {
    let (req_r, req_w) = std::io::pipe().unwrap();
    let (resp_r, resp_w) = std::io::pipe().unwrap();
    thread::spawn(move || serve(&gw, BufReader::new(req_r), resp_w));
    GatewayClient::from_streams(Box::new(resp_r), Box::new(req_w)).unwrap()
}

/// Answers each group of `group` requests in reverse order.
fn reversing(gw: MockGateway, group: usize) -> GatewayClient {
    let (req_r, req_w) = std::io::pipe().unwrap();
    let (resp_r, mut resp_w) = std::io::pipe().unwrap();
    thread::spawn(move || {
        let mut reader = BufReader::new(req_r);
        // the handshake is always answered on its own
        let hs: Request =
            serde_json::from_slice(&read_frame(&mut reader).unwrap().unwrap()).unwrap();
        write_message(&mut resp_w, &handle_request(&gw, hs)).unwrap();
        resp_w.flush().unwrap();
        loop {
            let mut pending = Vec::new();
            while pending.len() < group {
                match read_frame(&mut reader) {
                    Ok(Some(f)) => pending.push(serde_json::from_slice::<Request>(&f).unwrap()),
                    _ => return,
                }
            }
            for req in pending.into_iter().rev() {
                write_message(&mut resp_w, &handle_request(&gw, req)).unwrap();
            }
            resp_w.flush().unwrap();
        }
    });
    GatewayClient::from_streams(Box::new(resp_r), Box::new(req_w)).unwrap()
}

fn requests(n: usize) -> Vec<DistributionRequest> {
    (0..n)
        .map(|k| {
            DistributionRequest::new(
                format!("r{k}"),
                vec![1, 17, 2, 44, 3, (k % 60 + 1) as u32],
                vec![k % 6, (k + 2) % 6],
            )
        })
        .collect()
}

#[test]
fn client_matches_in_process_mock_bit_for_bit() {
    let mock = MockGateway::new(7);
    let client = served(MockGateway::new(7));
    assert_eq!(client.handshake().unwrap(), mock.handshake().unwrap());
    let text = "the bigger, the better.";
    assert_eq!(client.tokenize(text).unwrap(), mock.tokenize(text).unwrap());
    for req in requests(5) {
        let a = client.distributions(&req).unwrap();
        let b = mock.distributions(&req).unwrap();
        assert_eq!(a.request_id, req.request_id);
        for (p, lp) in &b.per_position {
            let got = &a.per_position[p];
            assert!(got.iter().zip(lp).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
    assert_eq!(
        client.decode(&[11, 12, 11]).unwrap(),
        vec!["day", "by", "day"]
    );
    assert_eq!(client.pos_tag(text).unwrap(), mock.pos_tag(text).unwrap());
}

#[test]
fn affinities_through_the_wire_equal_direct_ones() {
    let mock = MockGateway::new(3);
    let client = served(MockGateway::new(3));
    let text = "it was so hot that the road melted";
    let sd = analyze(&mock, "s", text).unwrap();
    let sc = analyze(&client, "s", text).unwrap();
    assert_eq!(sd, sc);
    for i in 0..sd.len() {
        assert_eq!(
            global_affinity(&mock, &sd, i).unwrap().to_bits(),
            global_affinity(&client, &sc, i).unwrap().to_bits()
        );
        for j in 0..sd.len() {
            if i != j {
                assert_eq!(
                    local_affinity(&mock, &sd, i, j).unwrap().to_bits(),
                    local_affinity(&client, &sc, i, j).unwrap().to_bits()
                );
            }
        }
    }
}

#[test]
fn out_of_order_responses_are_reassembled() {
    let mock = MockGateway::new(11);
    let client = reversing(MockGateway::new(11), 4).with_max_in_flight(8);
    let reqs = requests(16);
    let got = client.distributions_batch(&reqs);
    assert_eq!(got.len(), 16);
    for (req, resp) in reqs.iter().zip(got) {
        let resp = resp.unwrap();
        assert_eq!(resp.request_id, req.request_id);
        assert_eq!(resp, mock.distributions(req).unwrap());
    }
}

#[test]
fn remote_errors_map_to_typed_errors() {
    let client = served(MockGateway::new(1).with_max_positions(4).without_tagger());
    let long = DistributionRequest::new("x", vec![1, 2, 3, 4, 5, 6], vec![0]);
    assert!(matches!(
        client.distributions(&long),
        Err(GatewayError::Length { len: 6, max: 4 })
    ));
    assert!(matches!(
        client.pos_tag("a b"),
        Err(GatewayError::TaggerUnavailable)
    ));
    assert!(matches!(
        client.decode(&[999]),
        Err(GatewayError::BadRequest(_))
    ));
    // the connection survives errors
    assert_eq!(client.tokenize("a b").unwrap().len(), 2);
}

#[test]
fn batch_with_an_invalid_member_fails_only_that_member() {
    let client = served(MockGateway::new(1));
    let mut reqs = requests(3);
    reqs[1] = DistributionRequest::new("bad", vec![1, 2], vec![5]);
    let got = client.distributions_batch(&reqs);
    assert!(got[0].is_ok());
    assert!(got[1].is_err());
    assert!(got[2].is_ok());
}

#[test]
fn wrong_version_from_adapter_is_reported() {
    let (_req_r, req_w) = std::io::pipe().unwrap();
    let (resp_r, mut resp_w) = std::io::pipe().unwrap();
    thread::spawn(move || {
        let body = br#"{"v":2,"request_id":"1","type":"handshake","model_name":"m","vocab_size":3,"mask_token_id":0,"max_positions":8}"#;
        write_frame(&mut resp_w, body).unwrap();
        resp_w.flush().unwrap();
    });
    let err = GatewayClient::from_streams(Box::new(resp_r), Box::new(req_w)).unwrap_err();
    assert!(
        matches!(
            err,
            GatewayError::VersionMismatch {
                expected: 1,
                got: 2
            }
        ),
        "{err:?}"
    );
}

#[test]
fn malformed_request_gets_bad_request_and_the_server_continues() {
    let gw = MockGateway::new(0);
    let mut input = Vec::new();
    write_frame(&mut input, br#"{"v":1,"request_id":"a","type":"nonsense"}"#).unwrap();
    write_message(&mut input, &Request::new("b", RequestBody::Handshake)).unwrap();
    write_message(
        &mut input,
        &Request::new(
            "c",
            RequestBody::Tokenize {
                text: String::new(),
            },
        ),
    )
    .unwrap();
    let mut out = Vec::new();
    serve(&gw, input.as_slice(), &mut out).unwrap();
    let mut r = out.as_slice();
    let mut responses = Vec::new();
    while let Some(f) = read_frame(&mut r).unwrap() {
        responses.push(serde_json::from_slice::<Response>(&f).unwrap());
    }
    assert_eq!(responses.len(), 3);
    assert_eq!(responses[0].request_id, "a");
    assert!(
        matches!(&responses[0].body, ResponseBody::Error { code, .. } if code == "bad_request")
    );
    assert!(matches!(responses[1].body, ResponseBody::Handshake { .. }));
    assert!(
        matches!(&responses[2].body, ResponseBody::Error { code, .. } if code == "encoding_error")
    );
}

#[test]
fn version_mismatch_request_is_refused() {
    let gw = MockGateway::new(0);
    let mut req = Request::new("z", RequestBody::Handshake);
    req.v = 9;
    let resp = handle_request(&gw, req);
    assert!(
        matches!(&resp.body, ResponseBody::Error { code, .. } if code == "version_mismatch"),
        "{resp:?}"
    );
}

#[test]
fn log_probs_encoding_is_little_endian_f32() {
    let v = [0.0f32, -1.0, f32::MIN_POSITIVE.ln()];
    let enc = encode_log_probs(&v);
    let raw: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    use base64::Engine;
    assert_eq!(enc, base64::engine::general_purpose::STANDARD.encode(&raw));
    assert_eq!(protocol::decode_log_probs(&enc).unwrap(), v.to_vec());
    assert!(protocol::decode_log_probs("AAA").is_err());
}
