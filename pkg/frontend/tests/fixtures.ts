/**
 * Wire lines captured verbatim from the Python engine, used to pin the TS
 * codec against real server output.
 */

import type { Frame } from "../src/protocol.js";

export const VF_WELCOME_LINE =
  '{"type":"WELCOME","scene_id":"vf","title":"Versailles Fountain","tick_rate":30.0,"surfaces":["crt_01","crt_02","crt_03","crt_04","crt_05","crt_06","crt_07","crt_08","crt_09","crt_10","crt_11","crt_12","crt_13","crt_14","crt_15","crt_16","crt_17","crt_18","crt_19","crt_20","crt_21","crt_22","crt_23","crt_24","crt_25","crt_26","crt_27","crt_28","crt_29","crt_30","crt_31","crt_32","crt_33","crt_34","crt_35","crt_36","crt_37","crt_38"],"speakers":["spk_left","spk_right"],"menu_options":[]}';

export const MC_WELCOME_LINE =
  '{"type":"WELCOME","scene_id":"mc","title":"10.000 Moving Cities - Same but Different","tick_rate":30.0,"surfaces":["cube_1","cube_2","cube_3","cube_4"],"speakers":["spk_1","spk_2","spk_3","spk_4"],"menu_options":[{"city_id":"seoul","label":"Seoul"},{"city_id":"karlsruhe","label":"Karlsruhe"},{"city_id":"new_york","label":"New York"}]}';

export const MC_FRAME_BLANK_LINE =
  '{"type":"FRAME","seq":1,"t_ticks":1,"time":0.03333333333333333,"user_virtual_pose":{"position":[0.0,0.0,0.0],"yaw":0.0},"mapping":{"phys_pose":{"position":[0.0,0.0,0.0],"yaw":0.0},"heading_offset":0.0},"surfaces":[{"surface_id":"cube_1","media_id":"(blank)","frame_index":0},{"surface_id":"cube_2","media_id":"(blank)","frame_index":0},{"surface_id":"cube_3","media_id":"(blank)","frame_index":0},{"surface_id":"cube_4","media_id":"(blank)","frame_index":0}],"speaker_gains":{"spk_1":0.47555063862221125,"spk_2":0.47555063862221125,"spk_3":0.47555063862221125,"spk_4":0.47555063862221125},"selected_city":null}';

export const MC_FRAME_SEOUL_LINE =
  '{"type":"FRAME","seq":2,"t_ticks":2,"time":0.06666666666666667,"user_virtual_pose":{"position":[0.09995833854135666,0.0024994792100674346,0.0],"yaw":0.04999999999999982},"mapping":{"phys_pose":{"position":[0.09995833854135666,0.0024994792100674346,0.0],"yaw":0.04999999999999982},"heading_offset":0.0},"surfaces":[{"surface_id":"cube_1","media_id":"item_02","frame_index":0},{"surface_id":"cube_2","media_id":"item_05","frame_index":0},{"surface_id":"cube_3","media_id":"item_02","frame_index":0},{"surface_id":"cube_4","media_id":"item_01","frame_index":1}],"speaker_gains":{"spk_1":0.4832723261756005,"spk_2":0.4681475584145256,"spk_3":0.4677873458309081,"spk_4":0.48287609059534226},"selected_city":"seoul"}';

export const ERROR_LINE = '{"type":"ERROR","code":"bad_input","detail":"no menu widget in this scene"}';

/** Minimal well-formed FRAME for synthetic sequences. */
export function makeFrame(seq: number, x: number, y: number): Frame {
  return {
    type: "FRAME",
    seq,
    t_ticks: seq,
    time: seq / 30,
    user_virtual_pose: { position: [x, y, 0], yaw: 0 },
    mapping: { phys_pose: { position: [x / 10, y / 10, 0], yaw: 0 }, heading_offset: 0 },
    surfaces: [{ surface_id: "cube_1", media_id: "(blank)", frame_index: 0 }],
    speaker_gains: { spk_1: 0.5 },
    selected_city: null,
  };
}
