#pragma once

#include <string_view>

// Instruction and few-shot text for the generation and judging prompts, kept verbatim.
namespace situ::prompt_text {

inline constexpr std::string_view kSituationSystem = R"~~(You are an AI visual assistant tasked with expanding brief situational descriptions into 5 different detailed situation descriptions with human-object interactions within a 3D scene. Initially, the situation involves only one reference object, but your description should include at least two interacting objects. Exclude non-present objects. Each detailed description should be less than 20 words. The response should be in the format with 'S' is the detailed description and 'O' is the reference objects. Mention the directions (left, right, front, back) of all reference objects when standing. 'Interacting' should be an action conducted while standing, with the interacted object in front. Don't assume 'interacting' to be 'sitting'.)~~";

inline constexpr std::string_view kSituationUserSit = R"~~(brief situation: sitting on sofa_22, object attributes: {"windowsill_4": {"attributes": ["metal", "dark", "gray"], "location": "left"}, "plant_7": {"attributes": ["tall"], "location": "left"}, "plant_8": {"location": "left, within arm reach"},
"beanbag_17": {"location": "left"}, "table_19": {"attributes": ["wooden", "blue", "green", "rectangular", "low", "narrow"], "location": "front, within arm reach"}, "cushion_20": {"location": "left, within arm reach"}, "cushion_21": {"attributes": ["tall", "wide"], "location": "left"}, "sofa_22": {"attributes": ["padded", "L-shaped", "orange", "pink", "wide"],"location": "below"}, "tv_24": {"attributes": ["black"], "location": "front, far away"}...
})~~";

inline constexpr std::string_view kSituationAssistantSit = R"~~('S': 'Sitting on the L-shaped sofa, watching TV far away.', 'O': 'sofa_22, tv_24' 'S': 'Sitting on sofa, chatting with a person on the beanbag to my left.', 'O': 'sofa_22, beanbag_17' 'S': 'Sitting on sofa with a windowsill to the left.', 'O': 'sofa_22, windowsill_4' 'S': 'Sitting on sofa with two plants to the left.', 'O': 'sofa_22, plant_7, plant_8' 'S': 'Sitting on the L-shaped sofa with a wooden table in the front within arm reach.', 'O': 'sofa_22, table_19' 'S': 'Sitting on the L-shaped sofa with two cushions to the left.', 'O': 'sofa_22, cushion_20, cushion_21')~~";

inline constexpr std::string_view kSituationUserInteract = R"~~(brief situation: interacting with sink_7, object attributes: {"sink_7": {"attributes": ["white"], "location": "front, within arm reach"},
    "mirror_9": {"location": "front, within arm reach"},
    "toilet_13": {"attributes": ["seat down", "white", "tall", "wide"], "location": "left, within arm reach"},
    "bucket_14": {"location": "back, within arm reach"},
    "trash can_16": {"location": "front, within arm reach"}...
})~~";

inline constexpr std::string_view kSituationAssistantInteract = R"~~('S': 'Washing hands at the sink in the front within arm reach, and a trash can to the left by my feet.', 'O': 'sink_7, trash can_16' 'S': 'Cleaning the sink with a bucket behind me within arm reach.', 'O': 'sink_7, bucket_14' 'S': 'Washing my face at the sink, while the toilet is to my left within arm's reach.', 'O': 'sink_7, toilet_13' 'S': 'Washing hands at the sink with a mirror in the front within arm reach.', 'O': 'sink_7, mirror_9' 'S': 'Washing hands at the sink, with a small shelf to my left.', 'O': 'sink_7, shelf_10')~~";

inline constexpr std::string_view kSituationUserStand = R"~~(brief situation: standing with kitchen counter_2 12 o'clock, object attributes: {
    "kitchen counter_2": {
        "attributes": ["stone", "rectangular", "white", "low"], "location": "front, within arm reach"},
    "clutter_9": {"location": "front, within arm reach"},
    "clutter_11": {"location": "front, within arm reach"},
    "window_13": {"attributes": ["glass", "white"], "location": "right"},
    "garbage_16": {"attributes": ["cylindrical"], "location": "right"},
    "doorframe_22": {"attributes": ["rectangular", "white"], "location": "left"
    },
    "oven_24": {"attributes": ["black", "silver"], "location": "right, within arm reach"}...
})~~";

inline constexpr std::string_view kSituationAssistantStand = R"~~('S': 'Baking in front of the kitchen counter, with an oven to my right within arm's reach.', 'O': 'kitchen counter_2, oven_24' 'S': 'Cooking in front of the kitchen counter, with the doorframe to my left.', 'O': 'kitchen counter_2, doorframe_22' 'S': 'Cooking in front of the kitchen counter, with a window to my right.', 'O': 'kitchen counter_2, window_13' 'S': 'Cooking in front of the kitchen counter, with a garbage to my right.', 'O': 'kitchen counter_2, garbage_16' 'S': 'Standing in front of the kitchen counter, with two clutters also in the front within arm's reach.', 'O': 'kitchen counter_2, clutter_9, clutter_11')~~";

inline constexpr std::string_view kLongformSystem = R"~~(You are an AI assistant tasked with generating captions of changes and instructions to rearrange changed objects in a 3D scene, based on the current location and orientation of the observer. This includes the vertical allocentric relationships among the objects, their horizontal locations (specified in degrees and distance) relative to the observer, and their attributes. Objects undergoing changes are classified into four categories: removed, added, rigid, and non-rigid. Always provide a caption ('C') that describes the change, including egocentric details, but exclude any rearrangement instructions ('R') for removed or added objects. To generate caption ('C'), rewrite 'Caption' to include at least one location with distance and clockwise direction: current ('location', 'allocentric') or original ('location_old', 'allocentric_old'), and the distance in 'return'. To generate 'C', don't use direction in 'return'.
To generate rearrangement instruction ('R'), rewrite 'Instruction' to guide the user to reach the current 'location' of the changed object for the first step, then do 'return' to return the changed object, i.e. at least two steps for 'location' and 'return'. Mention the distance and direction of the movement ('location' and 'return').
And only generate 'C' for objects that have the label 'Caption'. When generating instructions, please always specify the direction and distance of the movement. Please rewrite the numbers (direction and distance) in 'Caption' and 'Instruction' with the provided ones ('location', 'location_old', 'return'), adjust verbs (e.g., push/pull) to reflect the observer's perspective. The output should be formatted as 'O' (object), 'T' (type of change), 'C' (description of change), and 'R' (numbered rearrangement actions, e.g., '1., 2., 3.,...'))~~";

inline constexpr std::string_view kLongformUser = R"~~(brief situation: standing with chair_34 9 o'clock, object attributes: {"removed": {"storage_22": {
            "location_old": "4 o'clock,  0.4m","Caption": "incomplete scan"
        }},
    "rigid": {
        "table_7": {
            "attributes": ["wooden", "rectangular", "white"], "location": "10 o'clock,  0.9m",
            "location_old": "10 o'clock,  1.0m",
            "allocentric_old": "monitor_8 standing on table_7, picture_23 lying on table_7",
            "allocentric": "monitor_8 standing on table_7",
            "Caption": "The table is against the wall, with a computer on top of it, and the window is to the right."
        },
        "chair_6": {
            "attributes": [
                "wide"
            ],
            "location": "11 o'clock,  0.8m",
            "return": "2 o'clock, 0.5m",
            "location_old": "12 o'clock,  1.0m",
            "Caption": "The chair was previously by the window, and now it is directly in front of the table.",
            "Instruction": "Move it one step right to the window"
        }
    },
    "non_rigid": {
        "curtain_5": {
            "location": "11 o'clock,  1.5m",
            "allocentric": "curtain_5 hanging on wall_3",
            "Caption": "the change is not obvious"
        }
    },
    "unchanged": {
        "rail_33": {
            "location": "1 o'clock,  1.6m"
        }...}})~~";

inline constexpr std::string_view kLongformAssistant = R"~~('O': 'storage_22', 'T': 'removed', 'C': 'The partially scanned storage at your 4 o'clock, 0.6 meter away, may have been removed.'
'O': 'table_7', 'T': 'rigid', 'C': 'The white table with a monitor on it at your 10 o'clock, 1.5 m away hasn't changed its position, but the picture on it has been removed.'
'O': 'chair_6', 'T': 'rigid', 'C': 'The chair, which was at your 11 o'clock, 1.4 meters away by the window, has been moved 0.5 meter to the front of the table.', 'R': 1. Turn to your front-left and take two steps, bypassing the couch half a step away. 2. Pick up the chair in front of the table. 3. Move the chair one step to your right, placing it beneath the window.' 'O': 'curtain_5', 'T': 'nonrigid', 'C': 'The curtain on your 1 o'clock, 1.8 meters away, remains hanging on the wall.')~~";

inline constexpr std::string_view kQuerySystem = R"~~(You are an AI assistant tasked with generating queries about changes to a specific object. Given the object's name and a set of its features, generate one query per feature. The tense indicates whether the provided information refers to the state before (past) or after (present) the change. Use the tense accordingly when generating queries, especially by referencing the spatial relation of the object (e.g., 'farthest object', 'nearest object', 'others', 'vertical_relationship'). 'others' also represents features of the object. 'num' represents the number of items in the same category within the scene. If 'num' equals 2, use the comparative form for the spatial location; if it is greater than 2, use the superlative form for the spatial location. Don't mention the instance ID of the object. Make the queries as short as possible to include only the necessary information. Please only ask for general changes, and don't ask about the specific change of the object.)~~";

inline constexpr std::string_view kQueryUserPre = R"~~({"object": "nightstand_8", "tense": "past",
"num":2,
"features": [{"nearest_objs": ["nearest to the curtain"]},
{'vertical_relationships': ["frame standing on nightstand", "lamp supported by nightstand"]}, {"farthest_objs": ["farthest to the wardrobe"]}
]})~~";

inline constexpr std::string_view kQueryAssistantPre = R"~~({"Query 1": "How has the nightstand that was nearer to the curtain been altered?",
"Query 2": "Which updates have been made to the nightstand that had a frame and a lamp on it?", "Query 3": "Could you describe what modifications were applied to the nightstand that stood farther from the wardrobe?", "Query 4": "What changes have been made to the nightstand that stood farther from the wardrobe?", "Query 5": "How has the nightstand that was farther from the wardrobe been altered?", "Query 6": "What changes have been made to the nightstand that stood nearer to the curtain?", "Query 7": "What kind of changes were made to the nightstand set farther from the wardrobe?", "Query 8": "How has the nightstand that was nearer to the curtain been altered?", "Query 9": "Please explain what has been adjusted on the nightstand situated farther from the wardrobe.", "Query 10": "What revisions have taken place regarding the nightstand that was at a distance from the wardrobe?"})~~";

inline constexpr std::string_view kQueryUserPost = R"~~({"object": "desk_5", "tense": "present",
"num":3,
"features": [{"nearest_objs": ["nearest to the wardrobe"]},
{'vertical_relationships': ["monitor standing on desk", "plant standing on desk"]}
]})~~";

inline constexpr std::string_view kQueryAssistantPost = R"~~({"Query 1": "How has the desk that is nearest to the wardrobe been altered?",
"Query 2": "What changes have been made to the desk that is closest to the wardrobe?", "Query 3": "Which updates have been made to the desk that has a monitor and a plant on it?", "Query 4": "Could you describe what modifications were applied to the desk with a monitor and a plant on it?", "Query 5": "How has the desk that is positioned nearest to the wardrobe been altered?", "Query 6": "What modifications have been applied to the desk situated nearest to the wardrobe?", "Query 7": "What kind of changes were made to the desk that is closest to the wardrobe?", "Query 8": "How has the desk with a monitor and a plant on it been altered?", "Query 9": "Please explain what has been adjusted on the nightstand situated farther from the wardrobe.", "Query 10": "What revisions have taken place regarding the desk that is closest to the wardrobe?"})~~";

inline constexpr std::string_view kQaSystem = R"~~(You are an AI visual assistant tasked with generating question and answer pairs based on changes observed in a sequence of scene images. The scenes detail the journey along a familiar route, highlighting shifts in object positioning and attributes. Your questions should cover the following areas:

Warning: Query if there is any changed object that obstructs the familiar route to a target object. If an object has the attribute 'Warning' means it becomes an emerged obstacle towards the target object in the list. Only mention one target object in the question.
Egocentric Distance Old/ Egocentric Distance ('How far ...'): Calculate the distance from the observer to the current or original location of objects. Prioritize the 'egocentric distance old' if the change exists. Allocentric Displacement ('How far ...'): ask about 'move_distance' of a specific object. Egocentric Direction Old/ Egocentric Direction ('In which direction ...'): Determine the current or original orientation of objects in relation to the observer. Prioritize the 'egocentric direction old' if the change exists.
Allocentric Relationship ('Where'): Examine the old or current vertical spatial relationships between objects.
Counting: Count objects of a specific type in a direction to the observer (front, left, behind, right).
Existence: Note the addition or removal of specific objects.
Attribute: Ask about a specific aspect of an object, focusing on its status, color, and material. Questions start with like 'What is the status/ color/ material?'.
Affordance: Check for objects serving specific purposes in the observer's immediate vicinity.

For each scenario, generate 15 questions and answer pairs addressing these topics to effectively map the changes in the scene. Don't ask anything about the wall, the ceiling, or the floor. Don't answer the direction and distance together. Don't mention numbers in the question. 'Where' is only for an egocentric relationship. Each answer should be a maximum of 5 words. Exclude non-present objects. Don't ask questions that cannot be answered. Don't ask for the direction of the movement. Please don't confuse shape with size. The output is in the format with 'Q' for the question, 'A' for the answer, 'O' for the reference object, and 'Type' for the type of question and answer pairs.)~~";

inline constexpr std::string_view kQaUser = R"~~({"rigid": {"chair_39": {"location": "11 o'clock, 0.4m", "move_distance": "1.6m", "location_old": "10 o'clock, 1.7m", "Warning": ["bed_3", "cabinet_6", "bag_24", "bag_38", "blanket_40", "laptop_41", "roll_42"]}, "table_18":{"material": ["wooden"], "color": ["white"], "shape": ["rectangular"], "state": ["messy"], "location": "5'clock, 0.1m", "location_old": "5 o'clock, 0.0m"}}, "unchanged": {"bed_3": {"state": ["messy"], "color":["gray"], "size": ["low", "narrow"], "location": "11 o'clock", 1.1m}, "cabinet_6": {"size": ["big"], "location": "12 o'clock, 1.9m"}, "door_14": { "state": ["closed"], "shape": ["flat"], "color": ["white"],"size": ["tall"],"location": "2 o'clock,  3.9m", "allocentric": "hanging on wall_13"},"clothes_15": {"color": ["beige", "black"], "location": "2 o'clock,  3.8m", "allocentric": "hanging on door_14"}, "chair_19": {"location": "6 o'clock, 0.3m"}, "clothes_dryer_20": {"location": "9 o'clock, 1.9m"}, "window_22": {"material": ["glass"],"shape": ["rectangular"], "state": ["half open/closed"], "location": "9 o'clock,  1.6m", "allocentric": "attached to wall_4, attached to wall_2"},"basket_25": {"size": ["big"],"location": "8 o'clock,  1.4m"},"clothes dryer_37": {"location": "2 o'clock,  3.1m"},         "blanket_40": {"location": "11 o'clock,  1.8m", "allocentric": " lying on bed_3"},         "laptop_41": {"color": ["gray"],"location": "12 o'clock,  2.4m", "allocentric": "standing on bed_3"}...})~~";

inline constexpr std::string_view kQaAssistant = R"~~('Q': 'How far was the chair, which was between the clothes dryer and the bed, moved?', 'A': '1.6 m', 'O': 'chair_39', 'Type': 'Allocentric Displacement'
'Q': 'Are there any changed objects on my familiar route to the bed?', 'A': 'A chair', 'O': 'bed_3, chair_39', 'Type': 'Warning'
'Q': 'What is the status of the white wooden table?', 'A': 'Messy', 'O': 'table_38', 'Type': 'Attribute'
'Q': 'How far was the clothes dryer to my left relative to me?', 'A': '1.9 m', 'O': 'clothes dryer_20', 'Type': 'Egocentric Distance Old'
'Q': 'How many chairs are there behind me?', 'A': 'One', 'O': 'chair_19', 'Type': 'Counting'
'Q': 'Is there something to hang clothes on in this room?', 'A': 'Two clothes dryers', 'O': 'clothes dryer_20, clothes dryer_37', 'Type': 'Affordance'
'Q': 'Which direction was the changed chair relative to me?', 'A': '10 o'clock', 'O': 'chair_39', 'Type': 'Egocentric Direction Old'
'Q': 'Is there any sofa in the room?', 'A': 'No', 'O': 'None', 'Type': 'Existence'
'Q': 'Is there anything to keep warm while sleeping?', 'A': 'A blanket', 'O': 'blanket_40', 'Type': 'Affordance'
'Q': 'Where are the beige and black clothes?', 'A': 'Hanging on the door', 'O': 'clothes_15, door_14', 'Type': 'Allocentric Relationship'
'Q': 'Where is the laptop?', 'A': 'Standing on the bed', 'O': 'laptop_41, bed_3', 'Type': 'Allocentric Relationship'
'Q': 'How far is the basket from me?', 'A': '1.4 m', 'O': 'basket_25', 'Type': 'Egocentric Distance'
'Q': 'What is the status of the window?', 'A': 'Half open', 'O': 'window_22', 'Type': 'Attribute'
'Q': 'Which direction is the changed chair relative to me?', 'A': '11 o'clock', 'O': 'chair_39', 'Type': 'Egocentric Direction'
'Q': 'How far is the chair in front of me?', 'A': '40 cm', 'O': 'chair_39', 'Type': 'Egocentric Distance')~~";

inline constexpr std::string_view kJudgeGeneral = R"~~(Score open-ended answers from 1 to 5 based on accuracy to the ground truth.

Score 2-4: Reflect partial correctness or minor errors.

Criteria:

Affordance: Question: Is there any furniture to rest feet on nearby? Ground Truth: Yes. Example Response: Yes, there is an ottoman nearby. Score: 5 (Correct match).
Attribute: Question: What is the color of the ottoman? Ground Truth: Blue, red, brown. Example Response: The ottoman is brown. Score: 3 (Partial match).
Existence: Question: Is there a chair on my left? Ground Truth: Yes. Example Response: Yes, there is a chair on the left. Score: 5 (Correct match).
Counting: Question: How many tables are in the room? Ground Truth: Three Examples. Response: Two. Score: 1 (Significant discrepancy).
Warning: Question: Are there any changed objects on my familiar route to the door? Ground Truth: Yes, a chair. Example Response: Yes, there is a table on the way to the door. Score: 2 (Major incorrect).
Allocentric Relationship: Question: Where is the kettle? Ground Truth: On the kitchen cabinet. Example Response: The kettle is on the kitchen counter. Score: 4 (Approximate match).

Output only the score.)~~";

inline constexpr std::string_view kJudgeDirection = R"~~(Score open-ended answers from 1 to 5 based on accuracy to the ground truth.

Score 2-4: Reflect partial correctness or minor errors.

Mapping of proximity direction and clock face: front (from 11 to 1 o'clock), left (from 8 to 10 o'clock), right (from 2 to 4 o'clock), back (from 5 to 7 o'clock).

Criteria:

Score 5: If the difference is less than or equal to 1 o'clock on the clock face, e.g., GT: '11 o'clock', Response: '10 o'clock'.
Score 4: If the response is in the correct proximity direction, e.g., GT: '6 o'clock'(back), Response: 'Back'.
Score 3: If the response is adjacent to the correct direction, e.g., GT: '11 o'clock'(front left), Response: 'Left'.
Score 2: If the response has a significant directional error but is not completely opposite, e.g., GT: '3 o'clock'(right), Response: 'Back'.
Score 1: If the response is in the opposite proximity direction to the ground truth, e.g., GT: '9 o'clock'(left), Response: '4 o'clock'(right).

Output only the score.)~~";

inline constexpr std::string_view kJudgeLongform = R"~~(You are an intelligent evaluator tasked with assessing the correctness and semantic similarity of model-generated answers to question-answering pairs.
Your goal is to compare the predicted answer with the reference (correct) answer and assign a score based on how well they align in meaning. Use the following scoring rubric:

Score 5: Completely correct or semantically equivalent.

Score 4: Key information is correct, with minor inaccuracies or omissions.

Score 3: Some relevant information, but lacks sufficient correctness or completeness.

Score 2: Mostly incorrect, but shows some relevance to the question.

Score 1: Completely incorrect or nonsensical.

Your response must be a single integer from 1 to 5, with no additional text or explanation.)~~";

}  // namespace situ::prompt_text
